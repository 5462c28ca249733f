"""
产物列名集中管理模块

所有 CSV 产物的列名与状态取值都在这里定义，写出、读取与测试共用同一份常量。

使用示例：
    from cmwu.column_names import Columns

    frame = frame[list(Columns.Regret.ORDER)]
    passed = frame[Columns.Regret.STATUS] == Columns.Status.PASS
"""


class Columns:
    """所有产物列名的命名空间"""

    # ===========================================
    # 状态取值
    # ===========================================
    class Status:
        PASS = 'pass'
        FAIL = 'fail'
        NOT_APPLICABLE = 'n/a'

    # ===========================================
    # 轨迹
    # ===========================================
    class Trajectory:
        """trajectory.csv：每轮每名玩家每个动作一行"""

        T = 't'
        BLOCK = 'block'
        OFFSET = 'offset'
        ANCHOR = 'anchor'
        AGENT = 'agent'
        ACTION = 'action'
        PROB = 'prob'

        ORDER = (T, BLOCK, OFFSET, ANCHOR, AGENT, ACTION, PROB)

    class ZSnapshot:
        """z_snapshots.csv：每个锚点轮更新后的 z"""

        TAU = 'tau'
        T = 't'
        AGENT = 'agent'
        ACTION = 'action'
        PROB = 'prob'

        ORDER = (TAU, T, AGENT, ACTION, PROB)

    class BlockResidual:
        TAU = 'tau'
        T = 't'
        RESIDUAL = 'residual'
        BOUND = 'bound'
        STATUS = 'status'

        ORDER = (TAU, T, RESIDUAL, BOUND, STATUS)

    # ===========================================
    # 度量报告
    # ===========================================
    class Regret:
        T = 'T'
        AGENT = 'agent'
        SUBSEQUENCE = 'subsequence'
        HORIZON_USED = 'horizon_used'
        REGRET = 'regret'
        BEST_RESPONSE = 'best_response_action'
        BOUND = 'bound'
        STATUS = 'status'

        ORDER = (T, AGENT, SUBSEQUENCE, HORIZON_USED, REGRET, BEST_RESPONSE, BOUND, STATUS)

        # subsequence 取值
        FULL = 'full'
        ANCHORS = 'anchors-only'
        Z_SEQUENCE = 'z-sequence'

    class CceGap:
        T = 'T'
        AGENT = 'agent'
        AVERAGING = 'averaging'
        NUM_PROFILES = 'num_profiles'
        GAP = 'gap'
        BOUND = 'bound'
        STATUS = 'status'

        ORDER = (T, AGENT, AVERAGING, NUM_PROFILES, GAP, BOUND, STATUS)

        # averaging 取值
        UNIFORM = 'uniform'
        ANCHORS = 'anchors'
        # agent 列中表示 max_i ε_i 的行
        OVERALL = 'all'

    class Rates:
        T = 'T'
        DYNAMICS = 'dynamics'
        ETA = 'eta'
        K = 'k'
        NUM_PROFILES = 'num_profiles'
        GAP = 'gap'
        RATIO = 'ratio'
        BOUND = 'bound'
        STATUS = 'status'

        ORDER = (T, DYNAMICS, ETA, K, NUM_PROFILES, GAP, RATIO, BOUND, STATUS)

    class Verify:
        PROPERTY = 'property'
        CASES = 'cases'
        PASSED = 'passed'
        FAILED = 'failed'
        STATUS = 'status'
        WORST_MARGIN = 'worst_margin'
        FAILING_CASE = 'failing_case'

        ORDER = (PROPERTY, CASES, PASSED, FAILED, STATUS, WORST_MARGIN, FAILING_CASE)
