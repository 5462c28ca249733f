"""
博弈文件读写

文件为单个 JSON 文档：

    {
      "format": "cmwu-game",
      "format_version": "1.0",
      "name": "matching-pennies",
      "players": 2,
      "actions": [2, 2],
      "payoffs": [[...玩家 1 展平张量...], [...玩家 2...]],
      "payoff_ceiling": 1.0
    }

payoffs 中每个数组按行优先顺序展平（玩家 1 的下标变化最慢）。
payoff_ceiling 仅供阅读，读取时重新计算。
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cmwu.errors import GameFileError
from cmwu.games.game_core import NormalFormGame
from cmwu.utils.formats import FORMAT_VERSION, GAME_FORMAT, check_format_version
from cmwu.utils.logger import get_logger

logger = get_logger(__name__)


class GameDocument(BaseModel):
    """博弈文件的结构校验模型"""

    model_config = ConfigDict(extra="forbid")

    format: str = GAME_FORMAT
    format_version: str = FORMAT_VERSION
    name: str = "custom"
    players: int = Field(ge=1)
    actions: list[int]
    payoffs: list[list[float]]
    payoff_ceiling: Optional[float] = None

    @model_validator(mode="after")
    def _check_dimensions(self) -> "GameDocument":
        if len(self.actions) != self.players:
            raise ValueError(f"actions 长度 {len(self.actions)} 与 players={self.players} 不符")
        if any(a < 1 for a in self.actions):
            raise ValueError(f"动作数必须为正整数: {self.actions}")
        if len(self.payoffs) != self.players:
            raise ValueError(f"payoffs 数量 {len(self.payoffs)} 与 players={self.players} 不符")
        expected = math.prod(self.actions)
        for i, flat in enumerate(self.payoffs):
            if len(flat) != expected:
                raise ValueError(f"玩家 {i} 的收益数组长度 {len(flat)} 应为 {expected}")
        return self


def game_to_document(game: NormalFormGame) -> GameDocument:
    return GameDocument(
        name=game.name,
        players=game.num_players,
        actions=list(game.action_counts),
        payoffs=[tensor.ravel(order="C").tolist() for tensor in game.payoff_tensors],
        payoff_ceiling=game.payoff_ceiling,
    )


def document_to_game(document: GameDocument) -> NormalFormGame:
    check_format_version(GAME_FORMAT, document.format, document.format_version)
    shape = tuple(document.actions)
    tensors = tuple(np.asarray(flat, dtype=float).reshape(shape, order="C") for flat in document.payoffs)
    game = NormalFormGame(tensors, name=document.name)
    if document.payoff_ceiling is not None and document.payoff_ceiling != game.payoff_ceiling:
        logger.warning(
            "[博弈文件] 文件声明的 payoff_ceiling=%r 与重新计算的 %r 不一致，以计算值为准",
            document.payoff_ceiling, game.payoff_ceiling,
        )
    return game


def read_game(path: str | Path) -> NormalFormGame:
    """
    读取博弈文件并校验全部不变量

    抛出：
        GameFileError: 文件不可读、不是合法 JSON、结构或版本不符
        GameValidationError: 收益张量违反博弈不变量（如负收益）
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise GameFileError(f"无法读取博弈文件 {path}: {e}") from e

    try:
        document = GameDocument.model_validate(raw)
    except ValidationError as e:
        raise GameFileError(f"博弈文件 {path} 结构错误: {e}") from e

    game = document_to_game(document)
    logger.info("[博弈文件] 已读取 %s：%d 名玩家，动作数 %s", path, game.num_players, game.action_counts)
    return game


def write_game(game: NormalFormGame, path: str | Path) -> Path:
    """将博弈写为 JSON 文档，返回写入路径"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(game_to_document(game).model_dump(), ensure_ascii=False, indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    return path
