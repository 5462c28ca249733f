from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from cmwu.errors import ConfigError, DomainError, ShapeError
from cmwu.games.game_core import NormalFormGame, uniform_profile, uniform_strategy
from cmwu.learning.learning_rules import (
    AgentConfig,
    FixedPointSettings,
    btrl_z_update,
    classic_mwu_update,
    contraction_bound,
    default_eta,
    mwu_step,
    profile_distance,
    profile_map,
    resolve_etas,
    solve_cmwu_fixed_point,
)


# ===========================================
# mwu_step / btrl_z_update
# ===========================================

def test_mwu_step_reference_value():
    result = mwu_step([0.5, 0.5], [1.0, 0.0], 1.0)
    np.testing.assert_allclose(result, [0.731059, 0.268941], atol=1e-6)


def test_mwu_step_zero_step_is_identity():
    anchor = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(mwu_step(anchor, [0.9, 0.1, 0.4], 0.0), anchor, atol=1e-15)


def test_mwu_step_constant_payoffs_keep_anchor():
    np.testing.assert_allclose(mwu_step(uniform_strategy(4), [0.3] * 4, 2.0), uniform_strategy(4), atol=1e-15)


def test_mwu_step_shift_invariance():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = int(rng.integers(2, 8))
        anchor = rng.dirichlet(np.ones(m))
        v = rng.uniform(0.0, 1.0, size=m)
        eta = float(rng.uniform(0.0, 2.0))
        c = float(rng.uniform(-5.0, 5.0))
        np.testing.assert_allclose(mwu_step(anchor, v + c, eta), mwu_step(anchor, v, eta), atol=1e-12)


def test_mwu_step_output_is_normalized():
    rng = np.random.default_rng(6)
    for _ in range(50):
        m = int(rng.integers(2, 20))
        result = mwu_step(rng.dirichlet(np.ones(m)), rng.uniform(0.0, 1.0, size=m), float(rng.uniform(0.0, 5.0)))
        assert abs(result.sum() - 1.0) <= 1e-12
        assert np.all(result >= 0.0)


def test_mwu_step_large_step_does_not_overflow():
    result = mwu_step([0.5, 0.5], [1.0, 0.0], 700.0)
    assert np.all(np.isfinite(result))
    assert result[0] == pytest.approx(1.0)


def test_mwu_step_keeps_zero_anchor_entries():
    result = mwu_step([0.5, 0.0, 0.5], [0.0, 1.0, 0.2], 3.0)
    assert result[1] == 0.0
    assert result.sum() == pytest.approx(1.0, abs=1e-12)


def test_mwu_step_domain_errors():
    with pytest.raises(DomainError):
        mwu_step([0.0, 0.0], [1.0, 0.0], 0.5)
    with pytest.raises(DomainError):
        mwu_step([0.5, 0.5], [np.inf, 0.0], 0.5)
    with pytest.raises(DomainError):
        mwu_step([0.5, 0.5], [np.nan, 0.0], 0.5)
    with pytest.raises(ShapeError):
        mwu_step([0.5, 0.5], [1.0, 0.0, 0.0], 0.5)


def test_btrl_z_update_examples():
    np.testing.assert_allclose(btrl_z_update([0.5, 0.5], [0.5, 0.0], 0.25), [0.531209, 0.468791], atol=1e-6)
    np.testing.assert_array_equal(btrl_z_update([0.5, 0.5], [0.7, 0.7], 0.25), [0.5, 0.5])
    z = np.array([0.1, 0.9])
    np.testing.assert_allclose(btrl_z_update(z, [1.0, 0.0], 0.0), z, atol=1e-15)


def test_lipschitz_in_payoffs():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m = int(rng.integers(2, 21))
        eta = float(rng.uniform(0.0, 1.0))
        anchor = rng.dirichlet(np.ones(m))
        v, w = rng.uniform(0.0, 1.0, size=(2, m))
        lhs = np.abs(mwu_step(anchor, v, eta) - mwu_step(anchor, w, eta)).sum()
        assert lhs <= 2.0 * eta * np.max(np.abs(v - w)) + 1e-9


# ===========================================
# 组合层映射
# ===========================================

def test_classic_update_reference_value(corner_game):
    updated = classic_mwu_update(uniform_profile(corner_game), corner_game, 0.25)
    np.testing.assert_allclose(updated[0], [0.531209, 0.468791], atol=1e-6)
    np.testing.assert_allclose(updated[1], [0.531209, 0.468791], atol=1e-6)


def test_classic_update_fixed_cases(matching_pennies, random_game):
    uniform = uniform_profile(matching_pennies)
    for a, b in zip(classic_mwu_update(uniform, matching_pennies, [0.3, 0.7]), uniform):
        np.testing.assert_array_equal(a, b)

    game = random_game(n=3, m=3, seed=2)
    x = ([0.2, 0.3, 0.5], [0.6, 0.2, 0.2], [0.1, 0.1, 0.8])
    for a, b in zip(classic_mwu_update(x, game, 0.0), x):
        np.testing.assert_allclose(a, b, atol=1e-15)


def test_profile_map_fixed_cases(matching_pennies, random_game):
    uniform = uniform_profile(matching_pennies)
    for a, b in zip(profile_map(uniform, uniform, matching_pennies, 0.25), uniform):
        np.testing.assert_array_equal(a, b)

    game = random_game(n=2, m=3, seed=4)
    anchors = ([0.2, 0.3, 0.5], [0.6, 0.2, 0.2])
    x = ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    for a, b in zip(profile_map(x, anchors, game, 0.0), anchors):
        np.testing.assert_allclose(a, b, atol=1e-15)


def test_profile_map_contracts(random_game, random_profile):
    game = random_game(n=2, m=3, seed=11)
    rng = np.random.default_rng(11)
    eta = 0.25
    coefficient = contraction_bound(game, eta)
    assert coefficient == pytest.approx(0.25 * game.payoff_ceiling)
    for _ in range(20):
        anchors, x, y = (random_profile(rng, game) for _ in range(3))
        lhs = profile_distance(profile_map(x, anchors, game, eta), profile_map(y, anchors, game, eta))
        assert lhs <= coefficient * profile_distance(x, y) + 1e-12


def test_profile_distance_examples():
    assert profile_distance(([0.3, 0.7], [1.0, 0.0]), ([0.3, 0.7], [1.0, 0.0])) == 0.0
    assert profile_distance(([1.0, 0.0], [1.0, 0.0]), ([0.5, 0.5], [1.0, 0.0])) == 1.0
    assert profile_distance(([1.0, 0.0, 0.0],), ([0.0, 0.0, 1.0],)) == 2.0
    with pytest.raises(ShapeError):
        profile_distance(([1.0, 0.0],), ([1.0, 0.0], [1.0, 0.0]))
    with pytest.raises(ShapeError):
        profile_distance(([1.0, 0.0],), ([1.0, 0.0, 0.0],))


def test_profile_distance_metric_properties():
    rng = np.random.default_rng(9)
    for _ in range(30):
        x, y, z = ([rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(2))] for _ in range(3))
        assert profile_distance(x, y) == profile_distance(y, x)
        assert profile_distance(x, z) <= profile_distance(x, y) + profile_distance(y, z) + 1e-15
        assert profile_distance(x, y) <= 2.0


# ===========================================
# 步长
# ===========================================

def test_default_eta_and_bound(random_game):
    game = random_game(n=3, m=2, seed=0)
    eta = default_eta(game)
    assert eta == pytest.approx(1.0 / (6.0 * game.payoff_ceiling))
    assert contraction_bound(game, eta) == pytest.approx(1.0 / 3.0)


def test_all_zero_game_uses_unit_ceiling():
    game = NormalFormGame((np.zeros((2, 2)), np.zeros((2, 2))))
    assert default_eta(game) == 0.25


def test_resolve_etas_validation():
    np.testing.assert_array_equal(resolve_etas(0.1, 3), [0.1, 0.1, 0.1])
    with pytest.raises(ShapeError):
        resolve_etas([0.1, 0.2], 3)
    with pytest.raises(DomainError):
        resolve_etas(-0.1, 2)


def test_agent_config_rejects_non_positive_step():
    with pytest.raises(ValidationError):
        AgentConfig(eta=0.0)
    with pytest.raises(ValidationError):
        AgentConfig(eta=math.inf)


# ===========================================
# 不动点求解
# ===========================================

def test_solver_matching_pennies_uniform(matching_pennies):
    result = solve_cmwu_fixed_point(uniform_profile(matching_pennies), matching_pennies, 0.25)
    assert result.converged
    assert result.iterations == 1
    assert result.final_residual == 0.0
    for strategy in result.profile:
        np.testing.assert_array_equal(strategy, [0.5, 0.5])


def test_solver_iteration_count_at_quarter_step(corner_game, random_game, random_profile):
    rng = np.random.default_rng(3)
    for game in (corner_game, random_game(n=2, m=5, seed=3)):
        x_t = random_profile(rng, game)
        result = solve_cmwu_fixed_point(x_t, game, 0.25)
        assert result.converged
        assert result.iterations <= 18
        assert result.final_residual <= 1e-10


def test_solver_result_satisfies_implicit_update(random_game, random_profile):
    game = random_game(n=3, m=4, seed=8)
    rng = np.random.default_rng(8)
    x_t = random_profile(rng, game)
    eta = default_eta(game)
    result = solve_cmwu_fixed_point(x_t, game, eta)
    mapped = profile_map(result.profile, x_t, game, eta)
    assert profile_distance(mapped, result.profile) <= 10 * 1e-10


def test_solver_residual_refers_to_previous_iterate(random_game, random_profile, matching_pennies):
    game = random_game(n=3, m=4, seed=21)
    rng = np.random.default_rng(21)
    x_t = random_profile(rng, game)
    eta = default_eta(game)
    result = solve_cmwu_fixed_point(x_t, game, eta)
    assert result.converged
    own_residual = profile_distance(profile_map(result.profile, x_t, game, eta), result.profile)
    assert own_residual <= result.contraction_bound * result.final_residual + 1e-14

    # 未收敛时返回的就是被测残差的那个迭代点
    settings = FixedPointSettings(strict=False, max_iterations=50)
    anchor = uniform_profile(matching_pennies)
    stuck = solve_cmwu_fixed_point(anchor, matching_pennies, 10.0, settings, initial=([0.6, 0.4], [0.5, 0.5]))
    assert not stuck.converged
    stuck_residual = profile_distance(profile_map(stuck.profile, anchor, matching_pennies, 10.0), stuck.profile)
    assert stuck_residual == pytest.approx(stuck.final_residual, rel=1e-12)


def test_solver_contraction_estimates_respect_bound(random_game, random_profile):
    game = random_game(n=3, m=3, seed=13)
    rng = np.random.default_rng(13)
    result = solve_cmwu_fixed_point(random_profile(rng, game), game, default_eta(game))
    assert result.converged
    assert all(r >= 0.0 for r in result.contraction_estimates)
    assert all(r <= result.contraction_bound + 1e-6 for r in result.contraction_estimates[2:])


def test_solver_warm_starts_agree(random_game, random_profile):
    game = random_game(n=2, m=5, seed=17)
    rng = np.random.default_rng(17)
    x_t = random_profile(rng, game)
    settings = FixedPointSettings(tolerance=1e-10)
    first = solve_cmwu_fixed_point(x_t, game, 0.3, settings, initial=random_profile(rng, game))
    second = solve_cmwu_fixed_point(x_t, game, 0.3, settings, initial=random_profile(rng, game))
    assert profile_distance(first.profile, second.profile) <= 2e-10


def test_solver_single_player_converges_in_one_step():
    game = NormalFormGame((np.array([0.1, 0.8]),))
    result = solve_cmwu_fixed_point(([0.5, 0.5],), game, 50.0)
    assert result.converged
    assert result.iterations <= 2
    assert result.contraction_bound == 0.0


def test_solver_strict_mode_rejects_large_step(corner_game):
    with pytest.raises(ConfigError):
        solve_cmwu_fixed_point(uniform_profile(corner_game), corner_game, 1.0)


def test_solver_requires_fully_mixed_anchor(corner_game):
    with pytest.raises(DomainError):
        solve_cmwu_fixed_point(([1.0, 0.0], [0.5, 0.5]), corner_game, 0.25)


def test_solver_lenient_mode_reports_nonconvergence(matching_pennies):
    # η = 10 时均匀组合是 G 的唯一不动点但不稳定，从别处出发的迭代不会收敛
    settings = FixedPointSettings(strict=False, max_iterations=200)
    result = solve_cmwu_fixed_point(
        uniform_profile(matching_pennies), matching_pennies, 10.0, settings, initial=([0.6, 0.4], [0.5, 0.5])
    )
    assert not result.converged
    assert result.iterations == 200
    assert result.final_residual > settings.tolerance
    assert result.contraction_bound == 10.0
