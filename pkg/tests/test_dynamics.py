from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from cmwu.dynamics.protocol import (
    PayoffOracle,
    agent_broadcast,
    agent_receive,
    agent_step,
    initial_agent_state,
    run_dynamics,
    run_exact_cmwu,
    run_mwu_baseline,
)
from cmwu.dynamics.trajectory import CMWU, EXACT_CMWU, MWU, default_block_length
from cmwu.errors import ConfigError, ProtocolError
from cmwu.games.game_core import opponents, payoff_vector, uniform_profile
from cmwu.learning.learning_rules import (
    FixedPointSettings,
    default_eta,
    mwu_step,
    profile_distance,
    profile_map,
)


def reference_mwu(game, horizon, eta):
    A, B = game.payoff_tensors
    x = np.full(A.shape[0], 1.0 / A.shape[0])
    y = np.full(A.shape[1], 1.0 / A.shape[1])
    history = []
    for _ in range(horizon):
        history.append((x.copy(), y.copy()))
        vx, vy = A @ y, B.T @ x
        x = x * np.exp(eta * vx)
        x /= x.sum()
        y = y * np.exp(eta * vy)
        y /= y.sum()
    return history


def _play_round(oracle, states, channels, t):
    broadcasts = []
    for i, state in enumerate(states):
        x_i, states[i] = agent_broadcast(state, t)
        broadcasts.append(x_i)
    oracle.publish(t, broadcasts)
    for i, state in enumerate(states):
        states[i] = agent_receive(state, t, channels[i])
    return broadcasts


# ===========================================
# 单个智能体
# ===========================================

def test_first_anchor_updates_z_from_received_payoffs(corner_game):
    oracle = PayoffOracle(corner_game)
    channels = [oracle.channel(i) for i in range(2)]
    states = [initial_agent_state(i, 2, 0.25, 4) for i in range(2)]
    broadcasts = _play_round(oracle, states, channels, 0)

    for x_i in broadcasts:
        np.testing.assert_array_equal(x_i, [0.5, 0.5])
    np.testing.assert_allclose(states[0].z_curr, [0.531209, 0.468791], atol=1e-6)
    np.testing.assert_array_equal(states[0].last_payoffs, [0.5, 0.0])


def test_constant_payoffs_keep_z_and_replay_it(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    channels = [oracle.channel(i) for i in range(2)]
    states = [initial_agent_state(i, 2, 0.25, 4) for i in range(2)]
    _play_round(oracle, states, channels, 0)
    for state in states:
        np.testing.assert_array_equal(state.z_curr, [0.5, 0.5])

    broadcasts = _play_round(oracle, states, channels, 1)
    for x_i, state in zip(broadcasts, states):
        np.testing.assert_array_equal(x_i, state.z_curr)


def test_agent_step_against_published_round(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    oracle.publish(0, uniform_profile(matching_pennies))
    for i in range(2):
        state = initial_agent_state(i, 2, 0.25, 2)
        broadcast, state = agent_step(state, 0, oracle.channel(i))
        np.testing.assert_array_equal(broadcast, [0.5, 0.5])
        assert state.next_round == 1
        assert state.pending_round is None


def test_agent_step_rejects_mismatched_publication(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    oracle.publish(0, ([1.0, 0.0], [0.5, 0.5]))
    with pytest.raises(ProtocolError):
        agent_step(initial_agent_state(0, 2, 0.25, 2), 0, oracle.channel(0))


def test_rounds_must_be_presented_in_order():
    state = initial_agent_state(0, 2, 0.25, 2)
    with pytest.raises(ProtocolError):
        agent_broadcast(state, 1)
    _, pending = agent_broadcast(state, 0)
    with pytest.raises(ProtocolError):
        agent_broadcast(pending, 1)


def test_non_anchor_round_needs_cached_payoffs():
    state = replace(initial_agent_state(0, 2, 0.25, 2), next_round=1)
    with pytest.raises(ProtocolError):
        agent_broadcast(state, 1)


def test_receive_requires_broadcast(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    oracle.publish(0, uniform_profile(matching_pennies))
    with pytest.raises(ProtocolError):
        agent_receive(initial_agent_state(0, 2, 0.25, 2), 0, oracle.channel(0))


def test_agent_cannot_use_another_agents_channel(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    _, state = agent_broadcast(initial_agent_state(0, 2, 0.25, 2), 0)
    oracle.publish(0, uniform_profile(matching_pennies))
    with pytest.raises(ProtocolError):
        agent_receive(state, 0, oracle.channel(1))


def test_invalid_agent_configuration():
    with pytest.raises(ConfigError):
        initial_agent_state(0, 2, 0.25, 0)
    with pytest.raises(ValueError):
        initial_agent_state(0, 2, -1.0, 2)


# ===========================================
# 收益预言机
# ===========================================

def test_oracle_serves_each_agent_once_per_round(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    channel = oracle.channel(0)
    with pytest.raises(ProtocolError):
        channel.receive(0)
    oracle.publish(0, uniform_profile(matching_pennies))
    np.testing.assert_array_equal(channel.receive(0), [0.5, 0.5])
    with pytest.raises(ProtocolError):
        channel.receive(0)
    assert oracle.access_log == [(0, 0)]


def test_oracle_rounds_are_sequential(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    with pytest.raises(ProtocolError):
        oracle.publish(1, uniform_profile(matching_pennies))
    oracle.publish(0, uniform_profile(matching_pennies))
    with pytest.raises(ProtocolError):
        oracle.channel(0).receive(1)
    with pytest.raises(ProtocolError):
        oracle.channel(5)


def test_served_payoffs_are_read_only(matching_pennies):
    oracle = PayoffOracle(matching_pennies)
    oracle.publish(0, uniform_profile(matching_pennies))
    payoffs = oracle.channel(1).receive(0)
    with pytest.raises(ValueError):
        payoffs[0] = 1.0


# ===========================================
# CMWU 动力学
# ===========================================

@pytest.mark.parametrize(
    "horizon, expected",
    [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (1024, 10), (1025, 11), (4096, 12)],
)
def test_default_block_length(horizon, expected):
    assert default_block_length(horizon) == expected


def test_default_parameters_at_1024(matching_pennies):
    trajectory = run_dynamics(matching_pennies, 1024)
    assert trajectory.kind == CMWU
    assert trajectory.uncoupled
    assert trajectory.k == 10
    assert trajectory.anchors == tuple(range(0, 1024, 10))
    assert trajectory.last_block == 102
    assert len(trajectory.z_snapshots) == 103
    assert len(trajectory.block_residuals) == 102
    assert trajectory.etas == (0.25, 0.25)


def test_matching_pennies_stays_uniform(matching_pennies):
    trajectory = run_dynamics(matching_pennies, 37)
    for profile in trajectory.profiles:
        for strategy in profile:
            np.testing.assert_array_equal(strategy, [0.5, 0.5])
    assert all(r == 0.0 for r in trajectory.block_residuals)


def test_anchor_rounds_replay_previous_broadcast(random_game):
    trajectory = run_dynamics(random_game(n=3, m=3, seed=5), 100)
    for t in trajectory.anchors[1:]:
        for a, b in zip(trajectory.profiles[t], trajectory.profiles[t - 1]):
            np.testing.assert_array_equal(a, b)


def test_non_anchor_rounds_use_frozen_block_z(random_game):
    game = random_game(n=2, m=4, seed=6)
    trajectory = run_dynamics(game, 60, k=5)
    for t in range(1, trajectory.horizon):
        if trajectory.is_anchor(t):
            continue
        z = trajectory.z_snapshots[t // trajectory.k]
        previous = trajectory.profiles[t - 1]
        for i in range(game.num_players):
            expected = mwu_step(z[i], payoff_vector(game, i, opponents(previous, i)), trajectory.etas[i])
            np.testing.assert_array_equal(trajectory.profiles[t][i], expected)


def test_access_log_shows_uncoupled_queries(random_game):
    game = random_game(n=3, m=2, seed=7)
    trajectory = run_dynamics(game, 20)
    assert trajectory.access_log == tuple((t, i) for t in range(20) for i in range(3))


def test_runs_are_deterministic(random_game):
    game = random_game(n=2, m=5, seed=8)
    first, second = run_dynamics(game, 50), run_dynamics(game, 50)
    for p, q in zip(first.profiles, second.profiles):
        for a, b in zip(p, q):
            assert np.array_equal(a, b)
    assert first.block_residuals == second.block_residuals


def test_partial_trailing_block_is_recorded(random_game):
    trajectory = run_dynamics(random_game(seed=9), 10, k=4)
    assert trajectory.horizon == 10
    assert trajectory.anchors == (0, 4, 8)
    assert trajectory.last_block == 2
    assert len(trajectory.anchor_profiles()) == 3


def test_block_residuals_within_bound_small_run(random_game):
    trajectory = run_dynamics(random_game(n=2, m=5, seed=10), 256)
    bound = trajectory.block_residual_bound()
    assert bound == 8.0 / 2**8
    assert all(r <= bound for r in trajectory.block_residuals)


@pytest.mark.slow
def test_block_residuals_within_bound_at_4096(random_game):
    trajectory = run_dynamics(random_game(n=2, m=10, seed=3), 4096)
    assert trajectory.k == 12
    assert all(r <= 8.0 / 2**12 for r in trajectory.block_residuals)


def test_contraction_violating_override_is_a_warning(corner_game):
    trajectory = run_dynamics(corner_game, 8, eta=2.0, k=2)
    assert trajectory.warnings
    assert trajectory.horizon == 8


def test_per_player_step_sizes(random_game):
    trajectory = run_dynamics(random_game(seed=11), 8, eta=[0.1, 0.2])
    assert trajectory.etas == (0.1, 0.2)


def test_horizon_must_be_positive(matching_pennies):
    with pytest.raises(ConfigError):
        run_dynamics(matching_pennies, 0)


# ===========================================
# MWU 基线与精确 CMWU
# ===========================================

def test_mwu_baseline_matches_reference_loop(random_game):
    game = random_game(n=2, m=2, seed=5)
    trajectory = run_mwu_baseline(game, 3, 0.1)
    for profile, (x, y) in zip(trajectory.profiles, reference_mwu(game, 3, 0.1)):
        np.testing.assert_allclose(profile[0], x, atol=1e-12)
        np.testing.assert_allclose(profile[1], y, atol=1e-12)


def test_mwu_baseline_trivial_cases(matching_pennies, random_game):
    for profile in run_mwu_baseline(matching_pennies, 10, 0.7).profiles:
        for strategy in profile:
            np.testing.assert_array_equal(strategy, [0.5, 0.5])
    for profile in run_mwu_baseline(random_game(n=3, m=3, seed=1), 10, 0.0).profiles:
        for strategy in profile:
            np.testing.assert_allclose(strategy, [1 / 3] * 3, atol=1e-15)


def test_mwu_baseline_marks_every_round(random_game):
    trajectory = run_mwu_baseline(random_game(seed=2), 6, 0.2)
    assert trajectory.kind == MWU
    assert trajectory.k == 1
    assert trajectory.anchors == tuple(range(6))
    assert trajectory.z_snapshots == ()
    assert len(trajectory.access_log) == 12


def test_exact_cmwu_on_matching_pennies(matching_pennies):
    trajectory = run_exact_cmwu(matching_pennies, 5)
    assert trajectory.kind == EXACT_CMWU
    assert not trajectory.uncoupled
    assert trajectory.solver_iterations == (1,) * 5
    assert trajectory.nonconverged_steps == 0
    for profile in trajectory.profiles:
        for strategy in profile:
            np.testing.assert_array_equal(strategy, [0.5, 0.5])


def test_exact_cmwu_consecutive_profiles_satisfy_implicit_update(random_game):
    game = random_game(n=2, m=3, seed=12)
    eta = default_eta(game)
    trajectory = run_exact_cmwu(game, 15, eta)
    previous = uniform_profile(game)
    for profile in trajectory.profiles:
        assert profile_distance(profile_map(profile, previous, game, eta), profile) <= 1e-9
        previous = profile


def test_exact_cmwu_strict_mode_rejects_large_step(corner_game):
    with pytest.raises(ConfigError):
        run_exact_cmwu(corner_game, 3, 1.5)


def test_exact_cmwu_counts_nonconverged_steps(random_game):
    settings = FixedPointSettings(max_iterations=1)
    trajectory = run_exact_cmwu(random_game(n=2, m=3, seed=13), 4, settings=settings)
    assert trajectory.nonconverged_steps == 4
    assert trajectory.warnings
