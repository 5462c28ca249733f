from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from cmwu.games.game_core import NormalFormGame
from cmwu.games.generators import GeneratorSpec, generate_game

GOLDEN_DIR = Path(__file__).parent / "golden"
REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture
def matching_pennies() -> NormalFormGame:
    return generate_game(GeneratorSpec(kind="named", name="matching-pennies"))


@pytest.fixture
def corner_game() -> NormalFormGame:
    """两名玩家收益张量都是 [[1,0],[0,0]]，(0, 0) 是纯纳什均衡"""
    corner = np.array([[1.0, 0.0], [0.0, 0.0]])
    return NormalFormGame((corner, corner), name="corner")


@pytest.fixture
def random_game():
    def factory(*, n: int = 2, m: int = 2, seed: int = 0, actions=None) -> NormalFormGame:
        return generate_game(GeneratorSpec(kind="random", n=n, m=m, actions=actions, seed=seed))

    return factory


@pytest.fixture
def random_profile():
    """完全混合的随机策略组合"""

    def factory(rng: np.random.Generator, game: NormalFormGame) -> tuple:
        return tuple(rng.dirichlet(np.ones(m)) for m in game.action_counts)

    return factory
