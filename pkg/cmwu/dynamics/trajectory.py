"""
轨迹

一次动力学运行的完整记录：每轮广播的策略组合、锚点轮次、锚点处的 z 快照、
块残差以及收益预言机的访问日志。锚点轮次恰为 k 的倍数且小于 T。
"""

from __future__ import annotations

from dataclasses import dataclass

from cmwu.errors import ProtocolError
from cmwu.games.game_core import StrategyProfile

CMWU = "cmwu"
MWU = "mwu"
EXACT_CMWU = "exact-cmwu"
DYNAMICS_KINDS = (CMWU, MWU, EXACT_CMWU)


def default_block_length(horizon: int) -> int:
    """k = ⌈log₂ T⌉，T = 1 时取 1"""
    return max(1, (horizon - 1).bit_length())


@dataclass(frozen=True)
class Trajectory:
    """
    动力学轨迹

    参数：
        kind: cmwu | mwu | exact-cmwu
        game_name: 博弈名称
        k: 块长度；mwu 与 exact-cmwu 为 1（每轮都是锚点）
        etas: 逐玩家步长
        profiles: x^0 .. x^{T-1}
        anchors: {t : t mod k = 0, t < T}
        z_snapshots: 每个锚点轮 kτ 更新后的 z^{kτ}（仅 cmwu）
        block_residuals: τ = 1..T' 的 D(x^{kτ}, z^{kτ})（仅 cmwu）
        access_log: 收益预言机的 (轮次, 玩家) 访问记录
        warnings: 运行期间记录的警告
        solver_iterations / solver_residuals: exact-cmwu 每步的求解诊断
        nonconverged_steps: exact-cmwu 中未收敛的步数
        uncoupled: 是否为非耦合动力学
    """

    kind: str
    game_name: str
    k: int
    etas: tuple[float, ...]
    profiles: tuple[StrategyProfile, ...]
    anchors: tuple[int, ...]
    z_snapshots: tuple[StrategyProfile, ...] = ()
    block_residuals: tuple[float, ...] = ()
    access_log: tuple[tuple[int, int], ...] = ()
    warnings: tuple[str, ...] = ()
    solver_iterations: tuple[int, ...] = ()
    solver_residuals: tuple[float, ...] = ()
    nonconverged_steps: int = 0
    uncoupled: bool = True

    @property
    def horizon(self) -> int:
        return len(self.profiles)

    @property
    def last_block(self) -> int:
        """T' = ⌊(T-1)/k⌋"""
        return (self.horizon - 1) // self.k

    def block_of(self, t: int) -> tuple[int, int]:
        """轮次 t 的 (块号, 块内偏移)"""
        return t // self.k, t % self.k

    def is_anchor(self, t: int) -> bool:
        return t % self.k == 0

    def anchor_profiles(self) -> tuple[StrategyProfile, ...]:
        """x^0, x^k, ..., x^{kT'}"""
        if not self.anchors:
            raise ProtocolError("轨迹不含锚点")
        return tuple(self.profiles[t] for t in self.anchors)

    def block_residual_bound(self) -> float:
        """默认步长下块残差的理论上界 8/2^k"""
        return 8.0 / 2.0**self.k
