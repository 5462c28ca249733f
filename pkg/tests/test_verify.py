from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from cmwu.analysis.verify import (
    PropertyTally,
    VerifySettings,
    battery_games,
    brute_force_payoff_vector,
    run_verification,
)
from cmwu.column_names import Columns
from cmwu.errors import ConfigError
from cmwu.games.game_core import opponents, payoff_vector

PROPERTIES = [
    "lipschitz",
    "contraction",
    "oracle_equivalence",
    "fixed_point",
    "block_residual",
    "anchor_regret",
    "z_sequence_regret",
    "intra_block_decay",
    "exact_cmwu_regret",
    "folklore_identity",
    "btrl_adversarial",
]


@pytest.fixture
def small_settings() -> VerifySettings:
    return VerifySettings(
        seed=3,
        lipschitz_draws=50,
        contraction_draws=20,
        dynamics_games=2,
        dynamics_horizon=64,
        exact_games=1,
        exact_horizon=20,
        folklore_trajectories=5,
        adversarial_sequences=5,
        oracle_games=5,
    )


def _statuses(frame: pd.DataFrame) -> dict:
    return dict(zip(frame[Columns.Verify.PROPERTY], frame[Columns.Verify.STATUS]))


# ===========================================
# PropertyTally
# ===========================================

def test_tally_records_margins():
    tally = PropertyTally("demo")
    tally.record(0.5, "a")
    tally.record(-0.25, "b")
    tally.record(-1.0, "c")
    row = tally.row()
    assert (row[Columns.Verify.CASES], row[Columns.Verify.PASSED], row[Columns.Verify.FAILED]) == (3, 1, 2)
    assert row[Columns.Verify.STATUS] == Columns.Status.FAIL
    assert row[Columns.Verify.WORST_MARGIN] == -1.0
    assert row[Columns.Verify.FAILING_CASE] == "b"


def test_tally_without_cases_is_not_applicable():
    row = PropertyTally("empty").row()
    assert row[Columns.Verify.STATUS] == Columns.Status.NOT_APPLICABLE
    assert math.isnan(row[Columns.Verify.WORST_MARGIN])


def test_tally_fail_without_margin():
    tally = PropertyTally("solver")
    tally.record(0.0, "ok")
    tally.fail("未收敛")
    row = tally.row()
    assert row[Columns.Verify.STATUS] == Columns.Status.FAIL
    assert row[Columns.Verify.WORST_MARGIN] == 0.0
    assert row[Columns.Verify.FAILING_CASE] == "未收敛"


# ===========================================
# 用例构造
# ===========================================

def test_battery_rotates_shapes():
    games = battery_games(6, seed=0)
    shapes = [(g.num_players, g.max_actions) for _, g in games]
    assert shapes == [(2, 2), (2, 5), (2, 10), (3, 2), (3, 5), (3, 10)]
    assert games[4][0] == "seed=4 n=3 m=5"


def test_brute_force_agrees_with_payoff_vector(random_game, random_profile):
    rng = np.random.default_rng(21)
    game = random_game(actions=(2, 3, 2), seed=21)
    profile = random_profile(rng, game)
    for i in range(3):
        np.testing.assert_allclose(
            payoff_vector(game, i, opponents(profile, i)),
            brute_force_payoff_vector(game, i, profile),
            rtol=0.0,
            atol=1e-12,
        )


# ===========================================
# run_verification
# ===========================================

def test_small_battery_passes(small_settings):
    frame = run_verification(small_settings)
    assert list(frame.columns) == list(Columns.Verify.ORDER)
    assert frame[Columns.Verify.PROPERTY].tolist() == PROPERTIES
    assert not (frame[Columns.Verify.STATUS] == Columns.Status.FAIL).any()
    assert (frame[Columns.Verify.FAILED] == 0).all()
    assert _statuses(frame)["block_residual"] == Columns.Status.PASS


def test_rerun_is_identical(small_settings):
    pd.testing.assert_frame_equal(run_verification(small_settings), run_verification(small_settings))


def test_parallel_dynamics_match_serial(small_settings):
    parallel = small_settings.model_copy(update={"max_workers": 2})
    pd.testing.assert_frame_equal(run_verification(small_settings), run_verification(parallel))


def test_strict_mode_rejects_injected_step(small_settings):
    with pytest.raises(ConfigError):
        run_verification(small_settings.model_copy(update={"eta": 10.0}))


def test_lenient_injected_step_marks_dependent_properties(small_settings):
    frame = run_verification(small_settings.model_copy(update={"eta": 10.0, "lenient": True}))
    statuses = _statuses(frame)
    for name in ("contraction", "block_residual", "anchor_regret", "intra_block_decay", "exact_cmwu_regret"):
        assert statuses[name] == Columns.Status.NOT_APPLICABLE, name
    # 对任意步长成立的性质照常检查
    assert statuses["z_sequence_regret"] == Columns.Status.PASS
    assert statuses["btrl_adversarial"] == Columns.Status.PASS
    assert statuses["lipschitz"] == Columns.Status.PASS


@pytest.mark.slow
def test_default_battery_passes():
    frame = run_verification()
    assert not (frame[Columns.Verify.STATUS] == Columns.Status.FAIL).any()
    assert (frame[Columns.Verify.CASES] > 0).all()
