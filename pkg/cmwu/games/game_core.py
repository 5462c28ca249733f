"""
正规形博弈核心

核心功能：
1. NormalFormGame - 稠密收益张量表示的有限正规形博弈
2. 混合策略 / 策略组合的校验与构造
3. 期望收益 u_i(x) 与收益向量 v_i(x_{-i}) 的精确张量枚举计算

存储约定：
    第 i 名玩家的收益张量 A^(i) 形状为 (|S_1|, ..., |S_n|)，按行优先
    （C 顺序）存放，玩家 1 的下标变化最慢。所有收益取值于 [0, V]。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cmwu.errors import DomainError, GameValidationError, ShapeError

# 桌面规模上限：纯策略组合总数
MAX_PROFILE_COUNT = 10**7
# 混合策略归一化容差
PROBABILITY_ATOL = 1e-12

MixedStrategy = np.ndarray
StrategyProfile = tuple[np.ndarray, ...]
PayoffVector = np.ndarray


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# ===========================================
# 博弈定义
# ===========================================

@dataclass(frozen=True, eq=False)
class NormalFormGame:
    """
    有限正规形博弈

    构造后不可变，可在并发实验之间共享。payoff_ceiling (V) 在构造时
    由全部张量的最大元素计算得出，不接受外部传入。

    参数：
        payoff_tensors: 每名玩家一个收益张量，形状一致且维数等于玩家数
        name: 博弈名称，仅用于报告
    """

    payoff_tensors: tuple[np.ndarray, ...]
    name: str = "custom"
    action_counts: tuple[int, ...] = field(init=False)
    payoff_ceiling: float = field(init=False)

    def __post_init__(self) -> None:
        try:
            tensors = tuple(np.array(t, dtype=float) for t in self.payoff_tensors)
        except (TypeError, ValueError) as e:
            raise GameValidationError(f"收益张量无法转换为实数数组: {e}") from e

        if not tensors:
            raise GameValidationError("博弈至少需要一名玩家")

        num_players = len(tensors)
        shape = tensors[0].shape
        if len(shape) != num_players:
            raise GameValidationError(
                f"收益张量维数 {len(shape)} 与玩家数 {num_players} 不一致"
            )
        if any(d < 1 for d in shape):
            raise GameValidationError(f"每名玩家至少需要一个动作，得到 {shape}")
        if math.prod(shape) > MAX_PROFILE_COUNT:
            raise GameValidationError(
                f"纯策略组合数 {math.prod(shape)} 超过上限 {MAX_PROFILE_COUNT}"
            )

        for i, tensor in enumerate(tensors):
            if tensor.shape != shape:
                raise GameValidationError(
                    f"玩家 {i} 的收益张量形状 {tensor.shape} 与 {shape} 不一致"
                )
            if not np.all(np.isfinite(tensor)):
                raise GameValidationError(f"玩家 {i} 的收益张量含有非有限值")
            if np.any(tensor < 0):
                raise GameValidationError(f"玩家 {i} 的收益张量含有负数，收益必须非负")
            _readonly(tensor)

        object.__setattr__(self, "payoff_tensors", tensors)
        object.__setattr__(self, "action_counts", tuple(int(d) for d in shape))
        object.__setattr__(self, "payoff_ceiling", float(max(t.max() for t in tensors)))

    @property
    def num_players(self) -> int:
        return len(self.payoff_tensors)

    @property
    def max_actions(self) -> int:
        """m = max_i |S_i|"""
        return max(self.action_counts)

    @property
    def num_profiles(self) -> int:
        return math.prod(self.action_counts)

    def __repr__(self) -> str:
        return (
            f"NormalFormGame(name={self.name!r}, action_counts={self.action_counts}, "
            f"payoff_ceiling={self.payoff_ceiling})"
        )


# ===========================================
# 策略校验与构造
# ===========================================

def validate_strategy(probs: Sequence[float] | np.ndarray, num_actions: int) -> MixedStrategy:
    """
    校验并冻结一个混合策略

    参数：
        probs: 概率向量
        num_actions: 该玩家的动作数

    返回：
        只读的 float 数组副本

    抛出：
        ShapeError: 长度不符
        DomainError: 含 NaN、负数或不归一
    """
    strategy = np.array(probs, dtype=float)
    if strategy.ndim != 1 or strategy.shape[0] != num_actions:
        raise ShapeError(f"混合策略形状 {strategy.shape} 与动作数 {num_actions} 不符")
    if np.any(np.isnan(strategy)):
        raise DomainError("混合策略含有 NaN")
    if np.any(strategy < 0):
        raise DomainError("混合策略含有负概率")
    total = float(strategy.sum())
    if abs(total - 1.0) > PROBABILITY_ATOL:
        raise DomainError(f"混合策略概率和为 {total!r}，不等于 1")
    return _readonly(strategy)


def make_profile(game: NormalFormGame, strategies: Sequence) -> StrategyProfile:
    """按博弈维度校验策略组合，返回只读策略元组"""
    if len(strategies) != game.num_players:
        raise ShapeError(f"策略组合长度 {len(strategies)} 与玩家数 {game.num_players} 不符")
    return tuple(
        validate_strategy(x_i, m_i) for x_i, m_i in zip(strategies, game.action_counts)
    )


def uniform_strategy(num_actions: int) -> MixedStrategy:
    return _readonly(np.full(num_actions, 1.0 / num_actions))


def uniform_profile(game: NormalFormGame) -> StrategyProfile:
    return tuple(uniform_strategy(m) for m in game.action_counts)


def pure_strategy(num_actions: int, action: int) -> MixedStrategy:
    if not 0 <= action < num_actions:
        raise ShapeError(f"动作下标 {action} 超出范围 [0, {num_actions})")
    strategy = np.zeros(num_actions)
    strategy[action] = 1.0
    return _readonly(strategy)


def pure_profile(game: NormalFormGame, actions: Sequence[int]) -> StrategyProfile:
    if len(actions) != game.num_players:
        raise ShapeError(f"纯策略组合长度 {len(actions)} 与玩家数 {game.num_players} 不符")
    return tuple(pure_strategy(m, a) for m, a in zip(game.action_counts, actions))


def opponents(profile: Sequence[np.ndarray], i: int) -> tuple[np.ndarray, ...]:
    """x_{-i}：去掉玩家 i 后的策略，按玩家下标递增排列"""
    return tuple(x_j for j, x_j in enumerate(profile) if j != i)


def _check_player(game: NormalFormGame, i: int) -> None:
    if not 0 <= i < game.num_players:
        raise ShapeError(f"玩家下标 {i} 超出范围 [0, {game.num_players})")


# ===========================================
# 期望收益与收益向量
# ===========================================

def _contract(tensor: np.ndarray, strategies: Sequence[np.ndarray]) -> np.ndarray:
    # 自最后一个轴起依次与策略向量收缩
    accumulator = tensor
    for x_j in reversed(strategies):
        accumulator = accumulator @ x_j
    return accumulator


def _payoff_vector(game: NormalFormGame, i: int, others: Sequence[np.ndarray]) -> PayoffVector:
    """不做校验的 v_i(x_{-i})，供内部热循环使用"""
    accumulator = np.moveaxis(game.payoff_tensors[i], i, 0)
    return np.array(_contract(accumulator, others), dtype=float)


def expected_utility(game: NormalFormGame, i: int, x: Sequence) -> float:
    """
    u_i(x) = Σ_s A^(i)_s ∏_j x_{j s_j}

    参数：
        game: 博弈
        i: 玩家下标
        x: 策略组合

    返回：
        玩家 i 的期望收益

    抛出：
        ShapeError: 维度不符
    """
    _check_player(game, i)
    profile = make_profile(game, x)
    return float(_contract(game.payoff_tensors[i], profile))


def payoff_vector(game: NormalFormGame, i: int, x_minus_i: Sequence) -> PayoffVector:
    """
    v_i(x_{-i})：玩家 i 每个纯动作对对手组合 x_{-i} 的期望收益

    参数：
        game: 博弈
        i: 玩家下标
        x_minus_i: n-1 个对手策略，按玩家下标递增排列；n=1 时为空

    返回：
        长度为 |S_i| 的只读收益向量
    """
    _check_player(game, i)
    if len(x_minus_i) != game.num_players - 1:
        raise ShapeError(f"对手策略数 {len(x_minus_i)} 应为 {game.num_players - 1}")
    opponent_counts = [m for j, m in enumerate(game.action_counts) if j != i]
    others = tuple(validate_strategy(x_j, m_j) for x_j, m_j in zip(x_minus_i, opponent_counts))
    return _readonly(_payoff_vector(game, i, others))


def payoff_vectors(game: NormalFormGame, x: Sequence) -> tuple[PayoffVector, ...]:
    """所有玩家在组合 x 下的收益向量"""
    profile = make_profile(game, x)
    return tuple(
        _readonly(_payoff_vector(game, i, opponents(profile, i)))
        for i in range(game.num_players)
    )
