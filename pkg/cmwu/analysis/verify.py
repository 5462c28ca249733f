"""
性质验证

以固定种子的随机用例批量检查各模块的不变量，每个性质汇总为一行：

    property, cases, passed, failed, status, worst_margin, failing_case

worst_margin 为所有适用用例中 (上界 - 观测值) 的最小值，负数即违反。
同一 VerifySettings 重复运行得到完全相同的表。

注入步长（eta）时，只对任意步长成立的性质照常检查；依赖默认步长的性质
记为 n/a，压缩系数 >= 1 的压缩性质记为 n/a，不动点未收敛计为失败。
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from cmwu.analysis.metrics import (
    anchor_regret,
    anchor_regret_bound,
    btrl_regret_on_sequence,
    cce_gap,
    regret,
    z_sequence_regret,
    z_sequence_regret_bound,
)
from cmwu.column_names import Columns
from cmwu.dynamics.protocol import run_dynamics, run_exact_cmwu
from cmwu.errors import ConfigError
from cmwu.games.game_core import NormalFormGame, expected_utility, payoff_vector, opponents
from cmwu.games.generators import GeneratorSpec, generate_game
from cmwu.learning.learning_rules import (
    DEFAULT_TOLERANCE,
    RATIO_NOISE_FLOOR,
    FixedPointSettings,
    contraction_bound,
    default_eta,
    mwu_step,
    profile_distance,
    profile_map,
    solve_cmwu_fixed_point,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

NUMERIC_SLACK = 1e-9
ORACLE_TOLERANCE = 1e-12
FOLKLORE_TOLERANCE = 1e-10
INTRA_BLOCK_RATIO = 0.5
SOLVER_ITERATION_LIMIT = 40
ORACLE_PROFILE_LIMIT = 256

BATTERY_SHAPES = tuple(itertools.product((2, 3), (2, 5, 10)))


class VerifySettings(BaseModel):
    """
    验证批次参数

    参数：
        seed: 基础种子，第 j 个用例使用 seed + j
        eta: 注入的步长，None 表示各博弈使用默认 1/(2nV)
        lenient: 注入步长违反压缩条件时是否继续
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    lipschitz_draws: int = Field(default=1000, ge=1)
    contraction_draws: int = Field(default=200, ge=1)
    dynamics_games: int = Field(default=6, ge=1)
    dynamics_horizon: int = Field(default=1024, ge=2)
    exact_games: int = Field(default=3, ge=1)
    exact_horizon: int = Field(default=200, ge=1)
    folklore_trajectories: int = Field(default=50, ge=1)
    adversarial_sequences: int = Field(default=50, ge=1)
    oracle_games: int = Field(default=20, ge=1)
    eta: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)
    lenient: bool = False
    tolerance: float = Field(default=DEFAULT_TOLERANCE, gt=0)
    max_workers: int = Field(default=1, ge=1)


@dataclass
class PropertyTally:
    """单个性质的累计结果"""

    name: str
    cases: int = 0
    passed: int = 0
    failed: int = 0
    worst_margin: float = math.inf
    failing_case: str = ""
    applicable: bool = True

    def record(self, margin: float, case: str) -> None:
        self.cases += 1
        self.worst_margin = min(self.worst_margin, margin)
        if margin >= 0:
            self.passed += 1
        else:
            self.failed += 1
            if not self.failing_case:
                self.failing_case = case

    def fail(self, case: str) -> None:
        self.cases += 1
        self.failed += 1
        if not self.failing_case:
            self.failing_case = case

    def row(self) -> dict:
        if not self.applicable or self.cases == 0:
            status = Columns.Status.NOT_APPLICABLE
        else:
            status = Columns.Status.PASS if self.failed == 0 else Columns.Status.FAIL
        margin = self.worst_margin if math.isfinite(self.worst_margin) else math.nan
        return {
            Columns.Verify.PROPERTY: self.name,
            Columns.Verify.CASES: self.cases,
            Columns.Verify.PASSED: self.passed,
            Columns.Verify.FAILED: self.failed,
            Columns.Verify.STATUS: status,
            Columns.Verify.WORST_MARGIN: margin,
            Columns.Verify.FAILING_CASE: self.failing_case,
        }


# ===========================================
# 用例构造
# ===========================================

def _random_strategy(rng: np.random.Generator, m: int) -> np.ndarray:
    """完全混合的随机策略"""
    return rng.dirichlet(np.ones(m))


def _random_profile(rng: np.random.Generator, game: NormalFormGame) -> tuple:
    return tuple(_random_strategy(rng, m) for m in game.action_counts)


def battery_games(count: int, seed: int) -> list[tuple[str, NormalFormGame]]:
    """依次轮换 n ∈ {2,3}、m ∈ {2,5,10} 的随机博弈"""
    games = []
    for j in range(count):
        n, m = BATTERY_SHAPES[j % len(BATTERY_SHAPES)]
        game = generate_game(GeneratorSpec(kind="random", n=n, m=m, seed=seed + j))
        games.append((f"seed={seed + j} n={n} m={m}", game))
    return games


def brute_force_payoff_vector(game: NormalFormGame, i: int, profile) -> np.ndarray:
    """逐个枚举纯策略组合计算 v_i"""
    result = np.zeros(game.action_counts[i])
    for actions in itertools.product(*(range(m) for m in game.action_counts)):
        weight = 1.0
        for j, a in enumerate(actions):
            if j != i:
                weight *= profile[j][a]
        result[actions[i]] += weight * game.payoff_tensors[i][actions]
    return result


# ===========================================
# 各性质
# ===========================================

def check_lipschitz(settings: VerifySettings) -> PropertyTally:
    """||f_a(v) - f_a(v')||_1 <= 2η||v - v'||_∞"""
    tally = PropertyTally("lipschitz")
    rng = np.random.default_rng(settings.seed)
    for draw in range(settings.lipschitz_draws):
        m = int(rng.integers(2, 21))
        eta = settings.eta if settings.eta is not None else float(rng.uniform(0.0, 1.0))
        anchor = _random_strategy(rng, m)
        v, w = rng.uniform(0.0, 1.0, size=(2, m))
        lhs = float(np.abs(mwu_step(anchor, v, eta) - mwu_step(anchor, w, eta)).sum())
        rhs = 2.0 * eta * float(np.max(np.abs(v - w))) + NUMERIC_SLACK
        tally.record(rhs - lhs, f"seed={settings.seed} draw={draw} m={m} eta={eta!r}")
    return tally


def check_contraction(settings: VerifySettings) -> PropertyTally:
    """D(G(x), G(x')) <= η·V·(n-1)·D(x, x')，仅在系数 < 1 时适用"""
    tally = PropertyTally("contraction")
    rng = np.random.default_rng(settings.seed + 1)
    skipped = 0
    for draw in range(settings.contraction_draws):
        n = int(rng.integers(2, 4))
        m = int(rng.integers(2, 6))
        game = generate_game(GeneratorSpec(kind="random", n=n, m=m, seed=settings.seed + 10_000 + draw))
        if settings.eta is not None:
            eta = settings.eta
        else:
            eta = float(rng.uniform(0.0, 1.0)) / (game.payoff_ceiling * (n - 1))
        coefficient = contraction_bound(game, eta)
        if coefficient >= 1.0:
            skipped += 1
            continue
        anchors, x, y = (_random_profile(rng, game) for _ in range(3))
        lhs = profile_distance(profile_map(x, anchors, game, eta), profile_map(y, anchors, game, eta))
        rhs = coefficient * profile_distance(x, y) + NUMERIC_SLACK
        tally.record(rhs - lhs, f"seed={settings.seed + 10_000 + draw} n={n} m={m} eta={eta!r}")
    if skipped:
        logger.info("[验证] 压缩性质跳过 %d 个系数 >= 1 的用例", skipped)
    tally.applicable = tally.cases > 0
    return tally


def check_fixed_point(settings: VerifySettings, games) -> PropertyTally:
    """收敛、迭代次数 <= 40（默认步长）、两个热启动结果相距 <= 2·tolerance"""
    tally = PropertyTally("fixed_point")
    rng = np.random.default_rng(settings.seed + 2)
    solver = FixedPointSettings(tolerance=settings.tolerance, strict=not settings.lenient)
    for label, game in games:
        eta = settings.eta if settings.eta is not None else default_eta(game)
        x_t = _random_profile(rng, game)
        first = solve_cmwu_fixed_point(x_t, game, eta, solver)
        second = solve_cmwu_fixed_point(x_t, game, eta, solver, initial=_random_profile(rng, game))
        if not (first.converged and second.converged):
            tally.fail(f"{label} 未收敛（残差 {max(first.final_residual, second.final_residual):.3e}）")
            continue
        if settings.eta is None and max(first.iterations, second.iterations) > SOLVER_ITERATION_LIMIT:
            tally.fail(f"{label} 迭代 {max(first.iterations, second.iterations)} 次")
            continue
        gap = profile_distance(first.profile, second.profile)
        tally.record(2.0 * settings.tolerance - gap, label)
    return tally


def check_oracle_equivalence(settings: VerifySettings) -> PropertyTally:
    """payoff_vector 与 expected_utility 对照纯策略枚举"""
    tally = PropertyTally("oracle_equivalence")
    rng = np.random.default_rng(settings.seed + 3)
    for j in range(settings.oracle_games):
        n = int(rng.integers(1, 5))
        actions = tuple(int(a) for a in rng.integers(1, 5, size=n))
        if math.prod(actions) > ORACLE_PROFILE_LIMIT:
            continue
        game = generate_game(GeneratorSpec(kind="random", actions=actions, seed=settings.seed + 20_000 + j))
        profile = _random_profile(rng, game)
        worst = 0.0
        for i in range(n):
            reference = brute_force_payoff_vector(game, i, profile)
            worst = max(worst, float(np.max(np.abs(payoff_vector(game, i, opponents(profile, i)) - reference))))
            worst = max(worst, abs(expected_utility(game, i, profile) - float(reference @ profile[i])))
        tally.record(ORACLE_TOLERANCE - worst, f"seed={settings.seed + 20_000 + j} actions={actions}")
    return tally


def check_folklore_identity(settings: VerifySettings) -> PropertyTally:
    """均匀平均的 CCE 误差等于 regret/T"""
    tally = PropertyTally("folklore_identity")
    rng = np.random.default_rng(settings.seed + 4)
    for j in range(settings.folklore_trajectories):
        n, m = BATTERY_SHAPES[j % len(BATTERY_SHAPES)]
        game = generate_game(GeneratorSpec(kind="random", n=n, m=m, seed=settings.seed + 30_000 + j))
        T = int(rng.integers(1, 31))
        profiles = [_random_profile(rng, game) for _ in range(T)]
        report = cce_gap(game, profiles)
        worst = max(
            abs(report.per_agent_gap[i] - regret(game, profiles, i).regret / T)
            for i in range(n)
        )
        tally.record(FOLKLORE_TOLERANCE - worst, f"seed={settings.seed + 30_000 + j} T={T}")
    return tally


def check_btrl_adversarial(settings: VerifySettings) -> PropertyTally:
    """任意收益序列直接驱动 z 更新，遗憾 <= ln m / η"""
    tally = PropertyTally("btrl_adversarial")
    rng = np.random.default_rng(settings.seed + 5)
    for j in range(settings.adversarial_sequences):
        m = int(rng.integers(2, 11))
        T = int(rng.integers(1, 201))
        eta = settings.eta if settings.eta is not None else float(rng.uniform(0.01, 1.0))
        if j % 2 == 0:
            payoffs = rng.uniform(0.0, 1.0, size=(T, m))
        else:
            # 交替奖励不同动作
            payoffs = np.zeros((T, m))
            payoffs[np.arange(T), np.arange(T) % m] = 1.0
        value = btrl_regret_on_sequence(payoffs, eta)
        tally.record(z_sequence_regret_bound(m, eta) + NUMERIC_SLACK - value, f"seq={j} m={m} T={T} eta={eta!r}")
    return tally


def check_dynamics(settings: VerifySettings, games) -> list[PropertyTally]:
    """块残差、锚点遗憾、z 序列遗憾与块内几何衰减"""
    residual = PropertyTally("block_residual")
    anchor = PropertyTally("anchor_regret")
    z_bound = PropertyTally("z_sequence_regret")
    decay = PropertyTally("intra_block_decay")
    injected = settings.eta is not None
    for tally in (residual, anchor, decay):
        tally.applicable = not injected

    def run(entry):
        label, game = entry
        return label, game, run_dynamics(game, settings.dynamics_horizon, eta=settings.eta)

    if settings.max_workers > 1:
        with ThreadPoolExecutor(max_workers=settings.max_workers) as executor:
            runs = list(executor.map(run, games))
    else:
        runs = [run(entry) for entry in games]

    for label, game, trajectory in runs:
        for i, m_i in enumerate(game.action_counts):
            z_bound.record(
                z_sequence_regret_bound(m_i, trajectory.etas[i]) + NUMERIC_SLACK
                - z_sequence_regret(game, trajectory, i),
                f"{label} agent={i}",
            )
        if injected:
            continue

        bound = trajectory.block_residual_bound()
        for tau, value in enumerate(trajectory.block_residuals, start=1):
            residual.record(bound - value, f"{label} tau={tau}")
        for i in range(game.num_players):
            anchor.record(anchor_regret_bound(game) - anchor_regret(game, trajectory, i), f"{label} agent={i}")

        for start in trajectory.anchors:
            stop = min(start + trajectory.k, trajectory.horizon)
            previous = None
            for t in range(start + 1, stop):
                distance = profile_distance(trajectory.profiles[t], trajectory.profiles[t - 1])
                if previous is not None and previous > RATIO_NOISE_FLOOR:
                    decay.record(INTRA_BLOCK_RATIO * previous + RATIO_NOISE_FLOOR - distance, f"{label} t={t}")
                previous = distance
    return [residual, anchor, z_bound, decay]


def check_exact_cmwu(settings: VerifySettings) -> PropertyTally:
    """精确 CMWU 序列的遗憾 <= ln|S_i|/η_i + T·V·余量"""
    tally = PropertyTally("exact_cmwu_regret")
    solver = FixedPointSettings(tolerance=settings.tolerance, strict=not settings.lenient)
    games = [
        (f"seed={settings.seed + 40_000 + j} n=2 m={m}",
         generate_game(GeneratorSpec(kind="random", n=2, m=m, seed=settings.seed + 40_000 + j)))
        for j, m in zip(range(settings.exact_games), itertools.cycle((2, 5, 10)))
    ]
    for label, game in games:
        if settings.eta is not None and contraction_bound(game, settings.eta) >= 1.0:
            continue
        trajectory = run_exact_cmwu(game, settings.exact_horizon, settings.eta, solver)
        if trajectory.nonconverged_steps:
            tally.fail(f"{label} {trajectory.nonconverged_steps} 步未收敛")
            continue
        slack = settings.exact_horizon * game.payoff_ceiling * max(NUMERIC_SLACK, 10.0 * settings.tolerance)
        for i, m_i in enumerate(game.action_counts):
            bound = z_sequence_regret_bound(m_i, trajectory.etas[i]) + slack
            tally.record(bound - regret(game, trajectory.profiles, i).regret, f"{label} agent={i}")
    tally.applicable = tally.cases > 0
    return tally


# ===========================================
# 入口
# ===========================================

def run_verification(settings: Optional[VerifySettings] = None) -> pd.DataFrame:
    """
    运行全部性质检查

    返回：
        每个性质一行的 DataFrame，列见 Columns.Verify.ORDER

    抛出：
        ConfigError: 严格模式下注入的步长违反压缩条件
    """
    settings = settings or VerifySettings()
    games = battery_games(settings.dynamics_games, settings.seed)

    if settings.eta is not None and not settings.lenient:
        for label, game in games:
            if contraction_bound(game, settings.eta) >= 1.0:
                raise ConfigError(
                    f"注入步长 η={settings.eta!r} 在 {label} 上违反压缩条件，需使用宽松模式"
                )

    tallies = [
        check_lipschitz(settings),
        check_contraction(settings),
        check_oracle_equivalence(settings),
        check_fixed_point(settings, games),
        *check_dynamics(settings, games),
        check_exact_cmwu(settings),
        check_folklore_identity(settings),
        check_btrl_adversarial(settings),
    ]
    frame = pd.DataFrame([t.row() for t in tallies], columns=list(Columns.Verify.ORDER))
    failed = frame[frame[Columns.Verify.STATUS] == Columns.Status.FAIL]
    if failed.empty:
        logger.info("[验证] %d 项性质全部通过或不适用", len(frame))
    else:
        logger.warning("[验证] %d 项性质失败: %s", len(failed), failed[Columns.Verify.PROPERTY].tolist())
    return frame
