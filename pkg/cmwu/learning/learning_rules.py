"""
学习规则

核心功能：
1. mwu_step            - 以锚点为参数的 MWU 映射 f_a(v)
2. classic_mwu_update  - 显式 MWU：用当前组合的收益更新
3. profile_map         - 组合层映射 G(x) = (f_{a_1}(v_1(x_{-1})), ..., f_{a_n}(v_n(x_{-n})))
4. profile_distance    - D(x, y) = max_i ||x_i - y_i||_1
5. solve_cmwu_fixed_point - 通过压缩迭代求解 Clairvoyant MWU 的隐式更新
6. btrl_z_update       - 锚点轮的 z 序列更新（带前瞻的正则化领先者）

当最大步长 η 满足 η·V·(n-1) < 1 时 G 是压缩映射，不动点唯一且迭代线性收敛。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cmwu.errors import ConfigError, DomainError, ShapeError
from cmwu.games.game_core import (
    MixedStrategy,
    NormalFormGame,
    PayoffVector,
    StrategyProfile,
    _payoff_vector,
    _readonly,
    make_profile,
    opponents,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 10_000
# 低于该值的相邻迭代距离只剩舍入噪声，不再记录压缩比
RATIO_NOISE_FLOOR = 1e-12


# ===========================================
# 配置与结果类型
# ===========================================

class AgentConfig(BaseModel):
    """单个智能体的步长 η_i"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eta: float = Field(gt=0, allow_inf_nan=False)


class FixedPointSettings(BaseModel):
    """
    不动点求解参数

    参数：
        tolerance: 对 D(x, G(x)) 的终止容差
        max_iterations: 最大 G 求值次数
        strict: 严格模式下拒绝 η·V·(n-1) >= 1 的步长；宽松模式照常迭代并如实报告
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    tolerance: float = Field(default=DEFAULT_TOLERANCE, gt=0, allow_inf_nan=False)
    max_iterations: int = Field(default=DEFAULT_MAX_ITERATIONS, ge=1)
    strict: bool = True


@dataclass(frozen=True)
class FixedPointResult:
    """
    不动点求解结果

    final_residual 始终是某个迭代点 x 的残差 D(x, G(x))。
    收敛时 profile 为最后一次求值 G(x)，即比 x 多走一步的像点，
    它自身的残差不超过 contraction_bound·final_residual；
    未收敛时 profile 为残差最小的迭代点 x 本身。
    """

    profile: StrategyProfile
    iterations: int
    final_residual: float
    contraction_estimates: tuple[float, ...] = field(default_factory=tuple)
    converged: bool = True
    contraction_bound: float = 0.0


# ===========================================
# 步长工具
# ===========================================

def resolve_etas(etas: float | Sequence[float], num_players: int) -> np.ndarray:
    """
    将标量或逐玩家步长统一为长度 n 的数组

    步长允许为 0（恒等映射），但必须有限且非负。
    """
    values = np.asarray(etas, dtype=float)
    if values.ndim == 0:
        values = np.full(num_players, float(values))
    if values.shape != (num_players,):
        raise ShapeError(f"步长个数 {values.shape} 与玩家数 {num_players} 不符")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise DomainError(f"步长必须为有限非负数: {values.tolist()}")
    return values


def contraction_bound(game: NormalFormGame, etas: float | Sequence[float]) -> float:
    """压缩系数上界 η_max·V·(n-1)"""
    eta_max = float(np.max(resolve_etas(etas, game.num_players)))
    return eta_max * game.payoff_ceiling * (game.num_players - 1)


def step_size_ceiling(game: NormalFormGame) -> float:
    """步长默认值使用的 V；全零博弈时退化为 1"""
    return game.payoff_ceiling if game.payoff_ceiling > 0 else 1.0


def default_eta(game: NormalFormGame) -> float:
    """η = 1/(2nV)，此时压缩系数 (n-1)/(2n) < 1/2"""
    return 1.0 / (2.0 * game.num_players * step_size_ceiling(game))


# ===========================================
# 单玩家映射
# ===========================================

def mwu_step(anchor: MixedStrategy, payoffs: PayoffVector, eta: float) -> MixedStrategy:
    """
    f_a(v)_s = a_s·exp(η v_s) / Σ_s' a_s'·exp(η v_s')

    指数在支撑集上减去最大值后计算，η·V 高达 700 也不会溢出。

    参数：
        anchor: 锚点策略 a（x_i^t 或 z_i）
        payoffs: 收益向量 v
        eta: 步长，0 时返回锚点本身

    返回：
        新的混合策略

    抛出：
        DomainError: 锚点全零或含非法值、收益非有限、步长非法
    """
    anchor = np.asarray(anchor, dtype=float)
    payoffs = np.asarray(payoffs, dtype=float)
    if anchor.shape != payoffs.shape or anchor.ndim != 1:
        raise ShapeError(f"锚点形状 {anchor.shape} 与收益向量形状 {payoffs.shape} 不符")
    if not np.all(np.isfinite(payoffs)):
        raise DomainError("收益向量含有非有限值")
    if not np.all(np.isfinite(anchor)) or np.any(anchor < 0):
        raise DomainError("锚点策略含有负数或非有限值")
    if not math.isfinite(eta) or eta < 0:
        raise DomainError(f"步长必须为有限非负数: {eta}")

    support = anchor > 0
    if not np.any(support):
        raise DomainError("锚点策略全为零")

    logits = eta * payoffs
    shift = np.max(logits[support])
    weights = np.zeros_like(anchor)
    weights[support] = anchor[support] * np.exp(logits[support] - shift)
    return _readonly(weights / weights.sum())


def btrl_z_update(z_prev: MixedStrategy, payoffs: PayoffVector, eta: float) -> MixedStrategy:
    """
    锚点轮的 z 更新：z^t = f_{z^{t-k}}(v_i(x_{-i}^t))

    数学上与 mwu_step 相同；单独命名以便在代码与测试中追踪 z 序列。
    """
    return mwu_step(z_prev, payoffs, eta)


# ===========================================
# 组合层映射
# ===========================================

def classic_mwu_update(
    x: Sequence, game: NormalFormGame, etas: float | Sequence[float]
) -> StrategyProfile:
    """显式 MWU：每名玩家用当前组合 x 的收益向量从 x_i 出发更新"""
    profile = make_profile(game, x)
    step = resolve_etas(etas, game.num_players)
    return tuple(
        mwu_step(profile[i], _payoff_vector(game, i, opponents(profile, i)), step[i])
        for i in range(game.num_players)
    )


def profile_map(
    x: Sequence, anchors: Sequence, game: NormalFormGame, etas: float | Sequence[float]
) -> StrategyProfile:
    """
    G(x)_i = f_{anchors_i}(v_i(x_{-i}))

    参数：
        x: 当前迭代点
        anchors: 锚点组合（x^t 或块锚点 z）
        game: 博弈
        etas: 步长
    """
    profile = make_profile(game, x)
    anchor_profile = make_profile(game, anchors)
    step = resolve_etas(etas, game.num_players)
    return _profile_map(profile, anchor_profile, game, step)


def _profile_map(
    profile: StrategyProfile, anchors: StrategyProfile, game: NormalFormGame, step: np.ndarray
) -> StrategyProfile:
    return tuple(
        mwu_step(anchors[i], _payoff_vector(game, i, opponents(profile, i)), step[i])
        for i in range(game.num_players)
    )


def profile_distance(x: Sequence, y: Sequence) -> float:
    """
    D(x, y) = max_i ||x_i - y_i||_1

    抛出：
        ShapeError: 玩家数或某玩家动作数不一致
    """
    if len(x) != len(y):
        raise ShapeError(f"策略组合长度不一致: {len(x)} vs {len(y)}")
    distance = 0.0
    for x_i, y_i in zip(x, y):
        x_i = np.asarray(x_i, dtype=float)
        y_i = np.asarray(y_i, dtype=float)
        if x_i.shape != y_i.shape:
            raise ShapeError(f"策略形状不一致: {x_i.shape} vs {y_i.shape}")
        distance = max(distance, float(np.abs(x_i - y_i).sum()))
    return distance


# ===========================================
# 不动点求解
# ===========================================

def solve_cmwu_fixed_point(
    x_t: Sequence,
    game: NormalFormGame,
    etas: float | Sequence[float],
    settings: Optional[FixedPointSettings] = None,
    initial: Optional[Sequence] = None,
) -> FixedPointResult:
    """
    求解 x^{t+1}_i = f_{x_i^t}(v_i(x^{t+1}_{-i}))

    从 initial（默认 x_t）出发迭代 x <- G(x)，直到 D(x, G(x)) <= tolerance。
    每次迭代计一次 G 求值；收敛时返回最后一次求值 G(x)，
    final_residual 报告的是 D(x, G(x))。

    参数：
        x_t: 当前组合，作为 G 的锚点，须完全混合
        game: 博弈
        etas: 标量或逐玩家步长
        settings: 求解参数，默认严格模式、容差 1e-10
        initial: 可选的热启动点

    返回：
        FixedPointResult；未收敛时 converged=False，携带残差最小的迭代点

    抛出：
        ConfigError: 严格模式下 η_max·V·(n-1) >= 1
        DomainError: x_t 不是完全混合策略
    """
    settings = settings or FixedPointSettings()
    anchors = make_profile(game, x_t)
    if any(np.any(a <= 0) for a in anchors):
        raise DomainError("CMWU 锚点 x_t 必须是完全混合策略")
    step = resolve_etas(etas, game.num_players)
    bound = contraction_bound(game, step)

    if bound >= 1.0:
        message = f"步长违反压缩条件：η_max·V·(n-1) = {bound:.6g} >= 1，不动点唯一性不再有保证"
        if settings.strict:
            raise ConfigError(message)
        logger.warning("[求解器] %s，宽松模式继续迭代", message)

    x = make_profile(game, initial) if initial is not None else anchors
    best_profile, best_residual = x, math.inf
    previous_step: Optional[float] = None
    ratios: list[float] = []

    for iteration in range(1, settings.max_iterations + 1):
        gx = _profile_map(x, anchors, game, step)
        residual = profile_distance(x, gx)
        logger.debug("[求解器] 第 %d 次迭代，残差 %.3e", iteration, residual)

        if previous_step is not None and previous_step > RATIO_NOISE_FLOOR:
            ratios.append(residual / previous_step)
        previous_step = residual

        if residual <= settings.tolerance:
            return FixedPointResult(
                profile=gx,
                iterations=iteration,
                final_residual=residual,
                contraction_estimates=tuple(ratios),
                converged=True,
                contraction_bound=bound,
            )
        if residual < best_residual:
            best_profile, best_residual = x, residual
        x = gx

    logger.warning(
        "[求解器] %d 次迭代内未收敛，最小残差 %.3e（容差 %.1e）",
        settings.max_iterations, best_residual, settings.tolerance,
    )
    return FixedPointResult(
        profile=best_profile,
        iterations=settings.max_iterations,
        final_residual=best_residual,
        contraction_estimates=tuple(ratios),
        converged=False,
        contraction_bound=bound,
    )
