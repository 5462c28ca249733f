"""
非耦合在线学习协议

每一轮所有智能体先广播混合策略，随后每个智能体只从收益预言机取回自己的
收益向量 v_i(x_{-i}^t)。智能体内部执行 Clairvoyant MWU 动力学：

    锚点轮 (t mod k == 0)：重放 x^{t-1}，收到收益后更新 z^t = f_{z^{t-k}}(v)
    非锚点轮：z 保持不变，x^t = f_z(v_i(x_{-i}^{t-1}))

仿真由中心化的中介驱动，但智能体只持有绑定到自己下标的 PayoffChannel，
看不到收益张量或他人的收益向量。
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from cmwu.errors import ConfigError, ProtocolError
from cmwu.dynamics.trajectory import CMWU, EXACT_CMWU, MWU, Trajectory, default_block_length
from cmwu.games.game_core import (
    MixedStrategy,
    NormalFormGame,
    PayoffVector,
    StrategyProfile,
    _payoff_vector,
    _readonly,
    make_profile,
    opponents,
    uniform_profile,
    uniform_strategy,
)
from cmwu.learning.learning_rules import (
    AgentConfig,
    FixedPointSettings,
    btrl_z_update,
    contraction_bound,
    default_eta,
    mwu_step,
    profile_distance,
    resolve_etas,
    solve_cmwu_fixed_point,
)
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)


# ===========================================
# 收益预言机
# ===========================================

class PayoffOracle:
    """
    收益预言机

    中介每轮发布广播组合后，各智能体通过自己的 PayoffChannel 取回收益向量。
    每个智能体每轮只能取一次，且只能取自己的向量。
    """

    def __init__(self, game: NormalFormGame):
        self._game = game
        self._round: Optional[int] = None
        self._profile: Optional[StrategyProfile] = None
        self._served: set[int] = set()
        self.access_log: list[tuple[int, int]] = []

    @property
    def game(self) -> NormalFormGame:
        return self._game

    def channel(self, player: int) -> "PayoffChannel":
        if not 0 <= player < self._game.num_players:
            raise ProtocolError(f"玩家下标 {player} 超出范围")
        return PayoffChannel(self, player)

    def publish(self, t: int, profile: Sequence[MixedStrategy]) -> None:
        """发布第 t 轮的广播组合；轮次必须从 0 起连续递增"""
        expected = 0 if self._round is None else self._round + 1
        if t != expected:
            raise ProtocolError(f"预言机期望发布第 {expected} 轮，收到第 {t} 轮")
        self._profile = make_profile(self._game, profile)
        self._round = t
        self._served = set()

    def _serve(self, player: int, t: int) -> PayoffVector:
        if self._round is None or t != self._round:
            raise ProtocolError(f"第 {t} 轮的组合尚未发布（当前轮次 {self._round}）")
        if player in self._served:
            raise ProtocolError(f"玩家 {player} 在第 {t} 轮重复查询收益")
        self._served.add(player)
        self.access_log.append((t, player))
        return _readonly(_payoff_vector(self._game, player, opponents(self._profile, player)))

    def _published_strategy(self, player: int, t: int) -> MixedStrategy:
        if self._round is None or t != self._round:
            raise ProtocolError(f"第 {t} 轮的组合尚未发布")
        return self._profile[player]


class PayoffChannel:
    """绑定到单个智能体的收益通道"""

    def __init__(self, oracle: PayoffOracle, player: int):
        self._oracle = oracle
        self.player = player

    def receive(self, t: int) -> PayoffVector:
        return self._oracle._serve(self.player, t)

    def published_strategy(self, t: int) -> MixedStrategy:
        return self._oracle._published_strategy(self.player, t)


# ===========================================
# CMWU 智能体
# ===========================================

@dataclass(frozen=True)
class CmwuAgentState:
    """
    智能体内部状态

    参数：
        player_index: 玩家下标
        x_prev: 最近一次广播的策略 x_i^{t-1}
        z_curr: 当前 z_i^t
        eta: 步长
        k: 块长度
        last_payoffs: 最近收到的收益向量
        next_round: 下一次应广播的轮次
        pending_round: 已广播、等待收益的轮次
    """

    player_index: int
    x_prev: MixedStrategy
    z_curr: MixedStrategy
    eta: float
    k: int
    last_payoffs: Optional[PayoffVector] = None
    next_round: int = 0
    pending_round: Optional[int] = None


def initial_agent_state(player_index: int, num_actions: int, eta: float, k: int) -> CmwuAgentState:
    """x_i^{-1} = z_i^{-1} = 均匀策略"""
    config = AgentConfig(eta=eta)
    if k < 1:
        raise ConfigError(f"块长度 k 必须 >= 1，得到 {k}")
    uniform = uniform_strategy(num_actions)
    return CmwuAgentState(player_index, uniform, uniform, config.eta, k)


def agent_broadcast(state: CmwuAgentState, t: int) -> tuple[MixedStrategy, CmwuAgentState]:
    """
    第一阶段：计算并广播 x_i^t

    抛出：
        ProtocolError: 轮次乱序、上一轮收益未接收、非锚点轮缺少缓存收益
    """
    if state.pending_round is not None:
        raise ProtocolError(f"玩家 {state.player_index} 第 {state.pending_round} 轮的收益尚未接收")
    if t != state.next_round:
        raise ProtocolError(f"玩家 {state.player_index} 期望第 {state.next_round} 轮，收到第 {t} 轮")

    if t % state.k == 0:
        broadcast = state.x_prev
    else:
        if state.last_payoffs is None:
            raise ProtocolError(f"玩家 {state.player_index} 在非锚点轮 {t} 缺少缓存收益")
        broadcast = mwu_step(state.z_curr, state.last_payoffs, state.eta)

    return broadcast, replace(state, x_prev=broadcast, next_round=t + 1, pending_round=t)


def agent_receive(state: CmwuAgentState, t: int, channel: PayoffChannel) -> CmwuAgentState:
    """第二阶段：取回 v_i(x_{-i}^t)；锚点轮更新 z"""
    if state.pending_round != t:
        raise ProtocolError(f"玩家 {state.player_index} 未在第 {t} 轮广播，不能接收收益")
    if channel.player != state.player_index:
        raise ProtocolError(f"玩家 {state.player_index} 不能使用玩家 {channel.player} 的通道")

    payoffs = channel.receive(t)
    z_next = btrl_z_update(state.z_curr, payoffs, state.eta) if t % state.k == 0 else state.z_curr
    return replace(state, z_curr=z_next, last_payoffs=payoffs, pending_round=None)


def agent_step(
    state: CmwuAgentState, t: int, channel: PayoffChannel
) -> tuple[MixedStrategy, CmwuAgentState]:
    """
    单个智能体完整执行第 t 轮

    要求中介已发布第 t 轮组合；智能体重新计算的广播必须与发布的一致。
    """
    broadcast, state = agent_broadcast(state, t)
    if not np.array_equal(broadcast, channel.published_strategy(t)):
        raise ProtocolError(f"玩家 {state.player_index} 第 {t} 轮的广播与已发布组合不一致")
    return broadcast, agent_receive(state, t, channel)


# ===========================================
# 中介：运行动力学
# ===========================================

def _check_horizon(horizon: int) -> None:
    if horizon < 1:
        raise ConfigError(f"时域 T 必须 >= 1，得到 {horizon}")


def run_dynamics(
    game: NormalFormGame,
    horizon: int,
    eta: Optional[float | Sequence[float]] = None,
    k: Optional[int] = None,
) -> Trajectory:
    """
    运行非耦合 CMWU 动力学

    参数：
        game: 博弈
        horizon: 时域 T
        eta: 步长覆盖，默认 1/(2nV)；可为逐玩家序列
        k: 块长度覆盖，默认 ⌈log₂ T⌉

    返回：
        含每轮组合、z 快照与块残差的 Trajectory
    """
    _check_horizon(horizon)
    step = resolve_etas(default_eta(game) if eta is None else eta, game.num_players)
    block = default_block_length(horizon) if k is None else int(k)

    warnings = []
    bound = contraction_bound(game, step)
    if bound >= 1.0:
        message = f"步长覆盖违反压缩条件：η_max·V·(n-1) = {bound:.6g} >= 1"
        logger.warning("[协议] %s", message)
        warnings.append(message)

    oracle = PayoffOracle(game)
    channels = [oracle.channel(i) for i in range(game.num_players)]
    states = [
        initial_agent_state(i, m_i, float(step[i]), block)
        for i, m_i in enumerate(game.action_counts)
    ]

    profiles: list[StrategyProfile] = []
    z_snapshots: list[StrategyProfile] = []
    for t in range(horizon):
        broadcasts = []
        for i in range(game.num_players):
            x_i, states[i] = agent_broadcast(states[i], t)
            broadcasts.append(x_i)
        oracle.publish(t, broadcasts)
        for i in range(game.num_players):
            states[i] = agent_receive(states[i], t, channels[i])

        profiles.append(tuple(broadcasts))
        if t % block == 0:
            z_snapshots.append(tuple(s.z_curr for s in states))

    block_residuals = tuple(
        profile_distance(profiles[block * tau], z_snapshots[tau])
        for tau in range(1, len(z_snapshots))
    )

    logger.info(
        "[协议] CMWU 动力学完成：T=%d, k=%d, η=%s, 锚点 %d 个",
        horizon, block, np.round(step, 6).tolist(), len(z_snapshots),
    )
    return Trajectory(
        kind=CMWU,
        game_name=game.name,
        k=block,
        etas=tuple(float(e) for e in step),
        profiles=tuple(profiles),
        anchors=tuple(range(0, horizon, block)),
        z_snapshots=tuple(z_snapshots),
        block_residuals=block_residuals,
        access_log=tuple(oracle.access_log),
        warnings=tuple(warnings),
    )


def run_mwu_baseline(
    game: NormalFormGame, horizon: int, etas: float | Sequence[float]
) -> Trajectory:
    """
    显式 MWU 基线：所有智能体从均匀策略出发，用本轮收益更新下一轮策略

    每轮都标记为锚点（k = 1），下游度量可统一处理。
    """
    _check_horizon(horizon)
    step = resolve_etas(etas, game.num_players)

    oracle = PayoffOracle(game)
    channels = [oracle.channel(i) for i in range(game.num_players)]
    current = list(uniform_profile(game))

    profiles: list[StrategyProfile] = []
    for t in range(horizon):
        oracle.publish(t, current)
        profiles.append(tuple(current))
        current = [
            mwu_step(current[i], channels[i].receive(t), step[i])
            for i in range(game.num_players)
        ]

    logger.info("[协议] MWU 基线完成：T=%d, η=%s", horizon, np.round(step, 6).tolist())
    return Trajectory(
        kind=MWU,
        game_name=game.name,
        k=1,
        etas=tuple(float(e) for e in step),
        profiles=tuple(profiles),
        anchors=tuple(range(horizon)),
        access_log=tuple(oracle.access_log),
    )


def run_exact_cmwu(
    game: NormalFormGame,
    horizon: int,
    etas: Optional[float | Sequence[float]] = None,
    settings: Optional[FixedPointSettings] = None,
) -> Trajectory:
    """
    中心化的精确 CMWU 序列（非耦合性不成立，仅用于验证常数遗憾）

    以 x^{-1} = 均匀策略为起点，x^0 = CMWU(x^{-1})，之后每一步
    x^{t+1} 都是以 x^t 为锚点的 CMWU 不动点。未收敛的步以残差最小的
    迭代点继续，并计入 nonconverged_steps。
    """
    _check_horizon(horizon)
    settings = settings or FixedPointSettings()
    step = resolve_etas(default_eta(game) if etas is None else etas, game.num_players)

    previous = uniform_profile(game)
    profiles: list[StrategyProfile] = []
    iterations: list[int] = []
    residuals: list[float] = []
    nonconverged = 0
    for _ in range(horizon):
        result = solve_cmwu_fixed_point(previous, game, step, settings)
        if not result.converged:
            nonconverged += 1
        profiles.append(result.profile)
        iterations.append(result.iterations)
        residuals.append(result.final_residual)
        previous = result.profile

    warnings = []
    if nonconverged:
        message = f"{nonconverged} 步不动点求解未收敛"
        logger.warning("[协议] %s", message)
        warnings.append(message)

    logger.info(
        "[协议] 精确 CMWU 序列完成：T=%d，最大迭代次数 %d", horizon, max(iterations),
    )
    return Trajectory(
        kind=EXACT_CMWU,
        game_name=game.name,
        k=1,
        etas=tuple(float(e) for e in step),
        profiles=tuple(profiles),
        anchors=tuple(range(horizon)),
        warnings=tuple(warnings),
        solver_iterations=tuple(iterations),
        solver_residuals=tuple(residuals),
        nonconverged_steps=nonconverged,
        uncoupled=False,
    )
