from __future__ import annotations

import json

import numpy as np
import pytest

from cmwu.errors import GameFileError, GameValidationError
from cmwu.games.game_io import game_to_document, read_game, write_game


def _write_document(path, **changes):
    document = {
        "format": "cmwu-game",
        "format_version": "1.0",
        "name": "tiny",
        "players": 2,
        "actions": [2, 2],
        "payoffs": [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0]],
    }
    document.update(changes)
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_bundled_matching_pennies_file(repo_root, matching_pennies):
    game = read_game(repo_root / "data" / "games" / "matching_pennies.json")
    assert game.name == "matching-pennies"
    for a, b in zip(game.payoff_tensors, matching_pennies.payoff_tensors):
        assert np.array_equal(a, b)


def test_written_game_reads_back(tmp_path, random_game):
    game = random_game(actions=(2, 3, 4), seed=11)
    path = write_game(game, tmp_path / "nested" / "game.json")
    loaded = read_game(path)
    assert loaded.action_counts == (2, 3, 4)
    assert loaded.payoff_ceiling == game.payoff_ceiling
    for a, b in zip(game.payoff_tensors, loaded.payoff_tensors):
        assert np.array_equal(a, b)


def test_flattening_is_row_major_with_first_player_slowest(random_game):
    game = random_game(actions=(2, 3), seed=0)
    document = game_to_document(game)
    tensor = game.payoff_tensors[0]
    assert document.payoffs[0][:3] == tensor[0, :].tolist()
    assert document.payoffs[0][3:] == tensor[1, :].tolist()


def test_declared_ceiling_is_recomputed(tmp_path):
    path = _write_document(tmp_path / "g.json", payoff_ceiling=7.0)
    assert read_game(path).payoff_ceiling == 1.0


def test_negative_payoffs_rejected(tmp_path):
    path = _write_document(tmp_path / "g.json", payoffs=[[1.0, -1.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0]])
    with pytest.raises(GameValidationError):
        read_game(path)


def test_wrong_payoff_length_rejected(tmp_path):
    path = _write_document(tmp_path / "g.json", payoffs=[[1.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.0]])
    with pytest.raises(GameFileError):
        read_game(path)


def test_unknown_field_rejected(tmp_path):
    path = _write_document(tmp_path / "g.json", comment="hello")
    with pytest.raises(GameFileError):
        read_game(path)


def test_incompatible_major_version(tmp_path):
    path = _write_document(tmp_path / "g.json", format_version="2.0")
    with pytest.raises(GameFileError):
        read_game(path)


def test_compatible_minor_version(tmp_path):
    path = _write_document(tmp_path / "g.json", format_version="1.3")
    assert read_game(path).action_counts == (2, 2)


def test_malformed_json_and_missing_file(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(GameFileError):
        read_game(broken)
    with pytest.raises(GameFileError):
        read_game(tmp_path / "missing.json")
