"""
博弈生成器

支持三类来源：
    random-uniform  各玩家收益 i.i.d. 取自 U[0, 1]
    zero-sum-2p     两人常和博弈，A^(2) = 1 - A^(1)（保持非负）
    named           固定的经典博弈，收益平移到 [0, 1]

同一 seed 生成的张量逐位一致。
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from thefuzz import process

from cmwu.errors import ConfigError
from cmwu.games.game_core import NormalFormGame
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)

RANDOM_UNIFORM = "random-uniform"
ZERO_SUM_2P = "zero-sum-2p"
NAMED = "named"

KIND_ALIASES = {
    "random": RANDOM_UNIFORM,
    RANDOM_UNIFORM: RANDOM_UNIFORM,
    "zero-sum": ZERO_SUM_2P,
    ZERO_SUM_2P: ZERO_SUM_2P,
    NAMED: NAMED,
}

_RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])

NAMED_GAMES = {
    "matching-pennies": (
        np.array([[1.0, 0.0], [0.0, 1.0]]),
        np.array([[0.0, 1.0], [1.0, 0.0]]),
    ),
    # 原始收益 {-1, 0, 1} 经 (a + 1) / 2 平移
    "rock-paper-scissors-01": (
        (_RPS + 1.0) / 2.0,
        (1.0 - _RPS) / 2.0,
    ),
}

# 模糊匹配建议的最低相似度
SUGGESTION_THRESHOLD = 60


def suggest(query: str, choices) -> Optional[str]:
    """为拼写错误的名称给出最接近的候选"""
    choices = list(choices)
    if not query or not choices:
        return None
    match = process.extractOne(query, choices)
    if match and match[1] >= SUGGESTION_THRESHOLD:
        return match[0]
    return None


class GeneratorSpec(BaseModel):
    """
    博弈生成参数

    参数：
        kind: random-uniform | zero-sum-2p | named（也接受 random / zero-sum 别名）
        n: 玩家数
        m: 每名玩家的动作数
        actions: 可选的逐玩家动作数，给出时覆盖 n 与 m
        seed: 随机种子，随机类生成器必填
        name: named 类型的博弈名
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: str
    n: int = Field(default=2, ge=1)
    m: int = Field(default=2, ge=1)
    actions: Optional[tuple[int, ...]] = None
    seed: Optional[int] = None
    name: Optional[str] = None

    @property
    def canonical_kind(self) -> str:
        kind = KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ConfigError(f"未知的博弈生成器类型: {self.kind}", suggest(self.kind, KIND_ALIASES))
        return kind

    @property
    def shape(self) -> tuple[int, ...]:
        if self.actions is not None:
            if not self.actions or any(a < 1 for a in self.actions):
                raise ConfigError(f"逐玩家动作数必须为正整数: {self.actions}")
            return tuple(self.actions)
        return (self.m,) * self.n

    @property
    def is_random(self) -> bool:
        return self.canonical_kind != NAMED


def generate_game(spec: GeneratorSpec) -> NormalFormGame:
    """
    按生成参数构造博弈

    抛出：
        ConfigError: 未知类型、缺少种子、零和博弈玩家数不为 2、未知博弈名
    """
    kind = spec.canonical_kind

    if kind == NAMED:
        if spec.name not in NAMED_GAMES:
            raise ConfigError(f"未知的命名博弈: {spec.name}", suggest(spec.name or "", NAMED_GAMES))
        return NormalFormGame(NAMED_GAMES[spec.name], name=spec.name)

    if spec.seed is None:
        raise ConfigError(f"{kind} 生成器需要显式的随机种子")

    shape = spec.shape
    rng = np.random.default_rng(spec.seed)

    if kind == RANDOM_UNIFORM:
        tensors = tuple(rng.uniform(0.0, 1.0, size=shape) for _ in shape)
        label = f"random-uniform(actions={'x'.join(map(str, shape))},seed={spec.seed})"
    else:
        if len(shape) != 2:
            raise ConfigError(f"zero-sum-2p 只支持两名玩家，得到 {len(shape)}")
        first = rng.uniform(0.0, 1.0, size=shape)
        tensors = (first, 1.0 - first)
        label = f"zero-sum-2p(actions={'x'.join(map(str, shape))},seed={spec.seed})"

    logger.debug("[生成器] 已生成 %s", label)
    return NormalFormGame(tensors, name=label)
