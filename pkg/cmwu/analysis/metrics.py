"""
遗憾与粗相关均衡（CCE）度量

核心功能：
1. regret / regret_report     - 外部遗憾，纯动作枚举即得单纯形上的最优比较者
2. anchor_regret              - 锚点子序列 x^0, x^k, ..., x^{kT'} 上的遗憾
3. z_sequence_regret          - 锚点处 z 序列（前瞻领先者）的遗憾
4. cce_gap                    - 加权平均组合的 CCE 近似误差 ε_i
5. rate_summary               - 多个时域下 CMWU 与 MWU 基线的收敛速度表
6. build_run_report           - 单次运行的遗憾表、CCE 表与累计序列

对数一律取自然对数；最优响应平局时取最小动作下标。
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from cmwu.column_names import Columns
from cmwu.dynamics.protocol import run_dynamics, run_exact_cmwu, run_mwu_baseline
from cmwu.dynamics.trajectory import CMWU, EXACT_CMWU, MWU, Trajectory
from cmwu.errors import ConfigError, InputError, ProtocolError, ShapeError
from cmwu.games.game_core import (
    NormalFormGame,
    StrategyProfile,
    _payoff_vector,
    make_profile,
    opponents,
    uniform_strategy,
)
from cmwu.learning.learning_rules import (
    DEFAULT_TOLERANCE,
    btrl_z_update,
    default_eta,
    resolve_etas,
    step_size_ceiling,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

# 报告 CCE 误差时截断为 0 的负舍入噪声
GAP_CLIP_TOLERANCE = 1e-10
WEIGHT_SUM_TOLERANCE = 1e-9
# 精确 CMWU 每轮求解误差的最小余量
EXACT_CMWU_SLACK_PER_ROUND = 1e-9

MWU_BASELINE_ALIASES = {MWU: MWU, "mwu-baseline": MWU}


# ===========================================
# 报告类型
# ===========================================

@dataclass(frozen=True)
class RegretEntry:
    """单名玩家在某子序列上的遗憾"""

    agent: int
    regret: float
    best_response_action: int
    horizon_used: int
    subsequence: str


@dataclass(frozen=True)
class RegretReport:
    """
    全体玩家的遗憾报告

    参数：
        per_agent_regret: 逐玩家遗憾，负值原样保留
        best_response_action: 逐玩家累计收益最高的纯动作
        horizon_used: 参与计算的组合个数
        subsequence: full | anchors-only | z-sequence
    """

    per_agent_regret: tuple[float, ...]
    best_response_action: tuple[int, ...]
    horizon_used: int
    subsequence: str

    @property
    def max_regret(self) -> float:
        return max(self.per_agent_regret)


@dataclass(frozen=True)
class CceGapReport:
    """
    CCE 近似误差

    参数：
        per_agent_gap: 逐玩家 ε_i（(-1e-10, 0) 内的负值截断为 0）
        overall_gap: max_i ε_i
        num_profiles_averaged: 参与平均的组合个数
    """

    per_agent_gap: tuple[float, ...]
    overall_gap: float
    num_profiles_averaged: int


# ===========================================
# 遗憾
# ===========================================

def payoff_sequence(game: NormalFormGame, profiles: Sequence, i: int) -> np.ndarray:
    """形状 (T, |S_i|)：第 t 行为 v_i(x_{-i}^t)"""
    rows = [_payoff_vector(game, i, opponents(make_profile(game, x), i)) for x in profiles]
    return np.vstack(rows) if rows else np.empty((0, game.action_counts[i]))


def strategy_sequence(profiles: Sequence, i: int) -> np.ndarray:
    return np.vstack([np.asarray(x[i], dtype=float) for x in profiles])


def regret_from_payoffs(strategies: np.ndarray, payoffs: np.ndarray) -> tuple[float, int]:
    """
    max_s Σ_t v^t_s - Σ_t <v^t, x^t>

    参数：
        strategies: 形状 (T, m)
        payoffs: 形状 (T, m)

    返回：
        (遗憾, 最优纯动作)
    """
    strategies = np.asarray(strategies, dtype=float)
    payoffs = np.asarray(payoffs, dtype=float)
    if strategies.shape != payoffs.shape or strategies.ndim != 2:
        raise ShapeError(f"策略序列形状 {strategies.shape} 与收益序列形状 {payoffs.shape} 不符")
    if strategies.shape[0] == 0:
        raise InputError("遗憾计算需要非空序列")
    cumulative = payoffs.sum(axis=0)
    realized = float(np.einsum("ts,ts->", strategies, payoffs))
    best = int(np.argmax(cumulative))
    return float(cumulative[best]) - realized, best


def regret(
    game: NormalFormGame, profiles: Sequence, i: int, subsequence: str = Columns.Regret.FULL
) -> RegretEntry:
    """玩家 i 在给定组合序列上的外部遗憾"""
    if len(profiles) == 0:
        raise InputError("遗憾计算需要非空序列")
    value, best = regret_from_payoffs(strategy_sequence(profiles, i), payoff_sequence(game, profiles, i))
    return RegretEntry(i, value, best, len(profiles), subsequence)


def regret_report(
    game: NormalFormGame, profiles: Sequence, subsequence: str = Columns.Regret.FULL
) -> RegretReport:
    entries = [regret(game, profiles, i, subsequence) for i in range(game.num_players)]
    return RegretReport(
        per_agent_regret=tuple(e.regret for e in entries),
        best_response_action=tuple(e.best_response_action for e in entries),
        horizon_used=len(profiles),
        subsequence=subsequence,
    )


def anchor_regret(game: NormalFormGame, trajectory: Trajectory, i: int) -> float:
    """
    锚点子序列上的遗憾

    抛出：
        ProtocolError: 轨迹不含锚点
    """
    return regret(game, trajectory.anchor_profiles(), i, Columns.Regret.ANCHORS).regret


def anchor_regret_bound(game: NormalFormGame) -> float:
    """默认参数下锚点遗憾的上界 12·n·V·ln m"""
    return 12.0 * game.num_players * game.payoff_ceiling * math.log(game.max_actions)


def z_sequence_regret(game: NormalFormGame, trajectory: Trajectory, i: int) -> float:
    """
    z^0, z^k, ..., z^{kT'} 对锚点收益向量 v_i(x_{-i}^{kτ}) 的遗憾

    抛出：
        ProtocolError: 轨迹没有 z 快照（只有 cmwu 动力学记录 z）
    """
    return _z_sequence_entry(game, trajectory, i).regret


def _z_sequence_entry(game: NormalFormGame, trajectory: Trajectory, i: int) -> RegretEntry:
    if not trajectory.z_snapshots:
        raise ProtocolError(f"{trajectory.kind} 轨迹没有 z 快照")
    payoffs = payoff_sequence(game, trajectory.anchor_profiles(), i)
    value, best = regret_from_payoffs(strategy_sequence(trajectory.z_snapshots, i), payoffs)
    return RegretEntry(i, value, best, len(trajectory.z_snapshots), Columns.Regret.Z_SEQUENCE)


def z_sequence_regret_bound(num_actions: int, eta: float) -> float:
    """ln|S_i| / η_i，对任意步长成立"""
    if num_actions == 1:
        return 0.0
    return math.log(num_actions) / eta if eta > 0 else math.inf


def btrl_regret_on_sequence(payoffs: np.ndarray, eta: float) -> float:
    """
    把任意收益向量序列直接喂给 btrl_z_update，返回 z 序列的遗憾

    z 从均匀策略出发，第 t 轮的 z^t 已看到 v^t（前瞻）。
    """
    payoffs = np.asarray(payoffs, dtype=float)
    if payoffs.ndim != 2 or payoffs.shape[0] == 0:
        raise InputError(f"收益序列形状非法: {payoffs.shape}")
    z = uniform_strategy(payoffs.shape[1])
    strategies = []
    for v in payoffs:
        z = btrl_z_update(z, v, eta)
        strategies.append(z)
    return regret_from_payoffs(np.vstack(strategies), payoffs)[0]


def mwu_regret_bound(num_actions: int, eta: float, horizon: int, payoff_ceiling: float) -> float:
    """显式 MWU 的遗憾上界 ln m/η + η·T·V²/8"""
    if num_actions == 1:
        return 0.0
    if eta <= 0:
        return math.inf
    return math.log(num_actions) / eta + eta * horizon * payoff_ceiling**2 / 8.0


# ===========================================
# CCE 近似误差
# ===========================================

def _resolve_weights(weights: Optional[Sequence[float]], count: int) -> np.ndarray:
    if weights is None:
        return np.full(count, 1.0 / count)
    w = np.asarray(weights, dtype=float)
    if w.shape != (count,):
        raise InputError(f"权重个数 {w.shape} 与组合个数 {count} 不符")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("权重必须为有限非负数")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise InputError(f"权重之和为 {w.sum()!r}，应为 1")
    return w


def _clip_gap(value: float) -> float:
    return 0.0 if -GAP_CLIP_TOLERANCE < value < 0.0 else value


def cce_gap(
    game: NormalFormGame, profiles: Sequence, weights: Optional[Sequence[float]] = None
) -> CceGapReport:
    """
    ε_i = max_s Σ_t w_t·v_{is}(x_{-i}^t) - Σ_t w_t·u_i(x^t)

    乘积分布下的期望退化为期望效用，不显式构造指数规模的联合分布。

    参数：
        game: 博弈
        profiles: 组合序列
        weights: 非负且和为 1 的权重，默认均匀

    抛出：
        InputError: 序列为空、权重不归一
    """
    if len(profiles) == 0:
        raise InputError("CCE 误差需要至少一个组合")
    w = _resolve_weights(weights, len(profiles))

    gaps = []
    for i in range(game.num_players):
        payoffs = payoff_sequence(game, profiles, i)
        strategies = strategy_sequence(profiles, i)
        comparator = float(np.max(w @ payoffs))
        realized = float(w @ np.einsum("ts,ts->t", strategies, payoffs))
        gaps.append(_clip_gap(comparator - realized))

    return CceGapReport(tuple(gaps), max(gaps), len(profiles))


def exact_cmwu_gap_bound(game: NormalFormGame, etas, horizon: int) -> float:
    """精确 CMWU 均匀平均的 CCE 误差上界 max_i ln|S_i| / (η_i·T)"""
    step = resolve_etas(etas, game.num_players)
    return max(z_sequence_regret_bound(m_i, float(step[i])) for i, m_i in enumerate(game.action_counts)) / horizon


# ===========================================
# 收敛速度表
# ===========================================

def mwu_baseline_eta(game: NormalFormGame, horizon: int) -> float:
    """固定时域的 MWU 步长 1 / (V·√T)"""
    return 1.0 / (step_size_ceiling(game) * math.sqrt(horizon))


def _status(value: float, bound: float) -> str:
    return Columns.Status.PASS if value <= bound else Columns.Status.FAIL


def _rate_row(game: NormalFormGame, horizon: int, dynamics: str) -> dict:
    if dynamics == CMWU:
        trajectory = run_dynamics(game, horizon)
        report = cce_gap(game, trajectory.anchor_profiles())
        ratio = report.overall_gap * horizon / math.log2(horizon)
        bound = anchor_regret_bound(game)
        eta = default_eta(game)
    elif dynamics == MWU:
        eta = mwu_baseline_eta(game, horizon)
        trajectory = run_mwu_baseline(game, horizon, eta)
        report = cce_gap(game, trajectory.profiles)
        ratio = report.overall_gap * math.sqrt(horizon)
        bound = mwu_regret_bound(game.max_actions, eta, horizon, game.payoff_ceiling) / math.sqrt(horizon)
    else:
        eta = default_eta(game)
        trajectory = run_exact_cmwu(game, horizon, eta)
        report = cce_gap(game, trajectory.profiles)
        ratio = report.overall_gap * horizon
        bound = exact_cmwu_gap_bound(game, eta, 1) + EXACT_CMWU_SLACK_PER_ROUND * horizon * game.payoff_ceiling

    logger.debug("[速度] %s T=%d 误差 %.3e 归一化比值 %.3e", dynamics, horizon, report.overall_gap, ratio)
    return {
        Columns.Rates.T: horizon,
        Columns.Rates.DYNAMICS: dynamics,
        Columns.Rates.ETA: float(eta),
        Columns.Rates.K: trajectory.k,
        Columns.Rates.NUM_PROFILES: report.num_profiles_averaged,
        Columns.Rates.GAP: report.overall_gap,
        Columns.Rates.RATIO: ratio,
        Columns.Rates.BOUND: bound,
        Columns.Rates.STATUS: _status(ratio, bound),
    }


def validate_horizons(horizons: Sequence[int]) -> list[int]:
    """时域必须 >= 2 且严格递增"""
    horizons = [int(T) for T in horizons]
    if not horizons:
        raise InputError("时域列表为空")
    if any(T < 2 for T in horizons):
        raise InputError(f"速度表的时域必须 >= 2: {horizons}")
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise InputError(f"时域必须严格递增: {horizons}")
    return horizons


def rate_summary(
    game: NormalFormGame,
    horizons: Sequence[int],
    dynamics: str | Sequence[str] = CMWU,
    max_workers: int = 1,
) -> pd.DataFrame:
    """
    各时域的整体 CCE 误差与归一化比值

    cmwu 在锚点平均上计算误差，比值为 gap·T/log₂T，上界 12nV·ln m；
    mwu 基线使用 η_T = 1/(V·√T)，在全轨迹均匀平均上计算，比值为
    gap·√T，上界 V·(ln m + 1/8)；exact-cmwu 比值为 gap·T。

    参数：
        game: 博弈
        horizons: 严格递增的时域列表
        dynamics: 单个或多个动力学类型（mwu-baseline 为 mwu 的别名）
        max_workers: 并行线程数，各时域互相独立

    返回：
        按 (dynamics, T) 排列的 DataFrame，列见 Columns.Rates.ORDER
    """
    horizons = validate_horizons(horizons)
    kinds = [dynamics] if isinstance(dynamics, str) else list(dynamics)
    resolved = []
    for kind in kinds:
        kind = MWU_BASELINE_ALIASES.get(kind, kind)
        if kind not in (CMWU, MWU, EXACT_CMWU):
            raise ConfigError(f"速度表不支持的动力学类型: {kind}")
        resolved.append(kind)

    jobs = [(T, kind) for kind in resolved for T in horizons]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            rows = list(executor.map(lambda job: _rate_row(game, *job), jobs))
    else:
        rows = [_rate_row(game, T, kind) for T, kind in jobs]

    logger.info("[速度] 完成 %d 个时域 × %s", len(horizons), resolved)
    return pd.DataFrame(rows, columns=list(Columns.Rates.ORDER))


# ===========================================
# 单次运行报告
# ===========================================

@dataclass(frozen=True)
class RunReport:
    """
    单次运行的全部度量

    参数：
        horizon: 轨迹长度 T
        regret: 遗憾表，列见 Columns.Regret.ORDER
        cce_gap: CCE 误差表，列见 Columns.CceGap.ORDER
        cumulative_regret: 形状 (T, n)，第 t 行为前 t+1 轮的逐玩家遗憾
        running_gap: 形状 (T,)，前 t+1 轮均匀平均的整体 CCE 误差
    """

    horizon: int
    regret: pd.DataFrame
    cce_gap: pd.DataFrame
    cumulative_regret: np.ndarray
    running_gap: np.ndarray

    @property
    def failed(self) -> bool:
        return bool(
            (self.regret[Columns.Regret.STATUS] == Columns.Status.FAIL).any()
            or (self.cce_gap[Columns.CceGap.STATUS] == Columns.Status.FAIL).any()
        )


def cumulative_regret_series(game: NormalFormGame, profiles: Sequence[StrategyProfile]) -> np.ndarray:
    columns = []
    for i in range(game.num_players):
        payoffs = payoff_sequence(game, profiles, i)
        realized = np.cumsum(np.einsum("ts,ts->t", strategy_sequence(profiles, i), payoffs))
        columns.append(np.max(np.cumsum(payoffs, axis=0), axis=1) - realized)
    return np.column_stack(columns)


def _bound_status(value: float, bound: float, applies: bool) -> str:
    if not applies or math.isnan(bound):
        return Columns.Status.NOT_APPLICABLE
    return _status(value, bound)


def _regret_rows(game: NormalFormGame, trajectory: Trajectory, bounds_apply: bool, slack: float) -> list[dict]:
    T = trajectory.horizon
    step = trajectory.etas
    rows = []

    def add(entry: RegretEntry, bound: float, applies: bool) -> None:
        rows.append({
            Columns.Regret.T: T,
            Columns.Regret.AGENT: entry.agent,
            Columns.Regret.SUBSEQUENCE: entry.subsequence,
            Columns.Regret.HORIZON_USED: entry.horizon_used,
            Columns.Regret.REGRET: entry.regret,
            Columns.Regret.BEST_RESPONSE: entry.best_response_action,
            Columns.Regret.BOUND: bound,
            Columns.Regret.STATUS: _bound_status(entry.regret, bound, applies),
        })

    for i, m_i in enumerate(game.action_counts):
        full = regret(game, trajectory.profiles, i)
        if trajectory.kind == CMWU:
            add(full, math.nan, False)
            add(regret(game, trajectory.anchor_profiles(), i, Columns.Regret.ANCHORS), anchor_regret_bound(game), bounds_apply)
            add(_z_sequence_entry(game, trajectory, i), z_sequence_regret_bound(m_i, step[i]), True)
        elif trajectory.kind == MWU:
            add(full, mwu_regret_bound(m_i, step[i], T, game.payoff_ceiling), True)
        else:
            add(full, z_sequence_regret_bound(m_i, step[i]) + slack, True)
    return rows


def _gap_rows(
    game: NormalFormGame, trajectory: Trajectory, bounds_apply: bool, slack: float
) -> list[dict]:
    T = trajectory.horizon
    step = trajectory.etas
    if trajectory.kind == CMWU:
        profiles = trajectory.anchor_profiles()
        averaging = Columns.CceGap.ANCHORS
        agent_bounds = [anchor_regret_bound(game) / len(profiles)] * game.num_players
    elif trajectory.kind == MWU:
        profiles = trajectory.profiles
        averaging = Columns.CceGap.UNIFORM
        agent_bounds = [mwu_regret_bound(m_i, step[i], T, game.payoff_ceiling) / T for i, m_i in enumerate(game.action_counts)]
        bounds_apply = True
    else:
        profiles = trajectory.profiles
        averaging = Columns.CceGap.UNIFORM
        agent_bounds = [(z_sequence_regret_bound(m_i, step[i]) + slack) / T for i, m_i in enumerate(game.action_counts)]
        bounds_apply = True

    report = cce_gap(game, profiles)
    labels = list(range(game.num_players)) + [Columns.CceGap.OVERALL]
    values = list(report.per_agent_gap) + [report.overall_gap]
    bounds = agent_bounds + [max(agent_bounds)]
    return [
        {
            Columns.CceGap.T: T,
            Columns.CceGap.AGENT: label,
            Columns.CceGap.AVERAGING: averaging,
            Columns.CceGap.NUM_PROFILES: report.num_profiles_averaged,
            Columns.CceGap.GAP: value,
            Columns.CceGap.BOUND: bound,
            Columns.CceGap.STATUS: _bound_status(value, bound, bounds_apply),
        }
        for label, value, bound in zip(labels, values, bounds)
    ]


def build_run_report(
    game: NormalFormGame,
    trajectory: Trajectory,
    default_parameters: bool = True,
    tolerance: float = DEFAULT_TOLERANCE,
) -> RunReport:
    """
    汇总一次运行的遗憾与 CCE 误差

    参数：
        game: 博弈
        trajectory: 任一动力学的轨迹
        default_parameters: cmwu 是否使用默认 η 与 k；锚点上界只在默认参数下检查
        tolerance: exact-cmwu 的求解容差，用于计算每轮余量

    返回：
        RunReport；不适用的上界 status 记为 n/a
    """
    if not trajectory.etas:
        raise InputError("轨迹缺少步长信息，无法计算上界")
    slack = trajectory.horizon * game.payoff_ceiling * max(EXACT_CMWU_SLACK_PER_ROUND, 10.0 * tolerance)

    cumulative = cumulative_regret_series(game, trajectory.profiles)
    counts = np.arange(1, trajectory.horizon + 1, dtype=float)
    running = np.max(cumulative, axis=1) / counts
    running = np.where((running < 0) & (running > -GAP_CLIP_TOLERANCE), 0.0, running)

    return RunReport(
        horizon=trajectory.horizon,
        regret=pd.DataFrame(_regret_rows(game, trajectory, default_parameters, slack), columns=list(Columns.Regret.ORDER)),
        cce_gap=pd.DataFrame(_gap_rows(game, trajectory, default_parameters, slack), columns=list(Columns.CceGap.ORDER)),
        cumulative_regret=cumulative,
        running_gap=running,
    )
