import numpy as np
import pytest
from conftest import M1_REWARD, m1_policy, random_instance, random_policy
from hypothesis import given
from hypothesis import strategies as st

from fairmdp.mdp import exact_agent_values, sample_episodes
from fairmdp.occupancy import (
    agent_values_from_q,
    induced_transition,
    is_feasible_q,
    is_feasible_z,
    marginalize_z,
    policy_from_q,
    policy_from_z,
    q_from_policy,
    z_from_policy,
)
from fairmdp.seeding import make_rng

dims = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 10_000))


def _instance(N, S, A, H, seed):
    m = random_instance(seed, N=N, S=S, A=A, H=H)
    return m, random_policy(np.random.default_rng(seed), H, S, A)


def test_m1_uniform_q():
    q = q_from_policy(m1_policy(0.5), np.zeros((0, 1, 2, 1)), np.array([1.0]))
    np.testing.assert_allclose(q, [[[0.5, 0.5]]])
    np.testing.assert_allclose(agent_values_from_q(q, M1_REWARD), [0.55, 0.55])


def test_deterministic_chain_q():
    p = np.zeros((1, 2, 1, 2))
    p[0, :, 0, 1] = 1.0
    q = q_from_policy(np.ones((2, 2, 1)), p, np.array([1.0, 0.0]))
    assert q[1, 1, 0] == 1.0 and q[1, 0, 0] == 0.0


def test_zero_rewards_zero_values():
    q = q_from_policy(m1_policy(0.3), np.zeros((0, 1, 2, 1)), np.array([1.0]))
    np.testing.assert_array_equal(agent_values_from_q(q, np.zeros_like(M1_REWARD)), [0, 0])


def test_q_matches_visit_frequencies():
    m, pi = _instance(2, 2, 2, 3, 4)
    q = q_from_policy(pi, m.transition, m.initial_distribution)
    b = sample_episodes(m, pi, make_rng(0), 100_000)
    for h in range(3):
        freq = np.zeros((2, 2))
        np.add.at(freq, (b.states[:, h], b.actions[:, h]), 1.0 / len(b))
        assert np.abs(freq - q[h]).max() <= 0.01


def test_policy_from_q_examples():
    q = np.array([[[0.3, 0.1], [0.0, 0.0]]])
    np.testing.assert_allclose(policy_from_q(q), [[[0.75, 0.25], [0.5, 0.5]]])


def test_policy_from_z_examples():
    z = np.zeros((1, 2, 2, 2))
    z[0, 0, 0] = [0.2, 0.2]
    z[0, 0, 1] = [0.1, 0.1]
    np.testing.assert_allclose(policy_from_z(z), [[[2 / 3, 1 / 3], [0.5, 0.5]]])


def test_marginalize_point_mass():
    z = np.zeros((2, 2, 2, 2))
    z[1, 0, 1, 1] = 1.0
    q = marginalize_z(z)
    assert q[1, 0, 1] == 1.0 and q.sum() == 1.0


@given(dims)
def test_values_from_q_equal_dp(d):
    m, pi = _instance(*d)
    q = q_from_policy(pi, m.transition, m.initial_distribution)
    np.testing.assert_allclose(agent_values_from_q(q, m.reward), exact_agent_values(m, pi), atol=1e-10)


@given(dims)
def test_round_trips_on_reachable_rows(d):
    m, pi = _instance(*d)
    q = q_from_policy(pi, m.transition, m.initial_distribution)
    z = z_from_policy(pi, m.transition, m.initial_distribution)
    reach = q.sum(axis=-1) > 0
    np.testing.assert_allclose(policy_from_q(q)[reach], pi[reach], atol=1e-10)
    np.testing.assert_allclose(policy_from_z(z)[reach], pi[reach], atol=1e-10)
    np.testing.assert_allclose(marginalize_z(z), q, atol=1e-12)
    np.testing.assert_allclose(q.sum(axis=(1, 2)), 1.0, atol=1e-12)


@given(dims)
def test_feasibility_accepts_and_rejects(d):
    m, pi = _instance(*d)
    q = q_from_policy(pi, m.transition, m.initial_distribution)
    z = z_from_policy(pi, m.transition, m.initial_distribution)
    assert is_feasible_q(q, m.transition, m.initial_distribution)
    assert is_feasible_z(z, m.initial_distribution)
    bad = q.copy()
    bad[-1, 0, 0] += 1e-5
    assert not is_feasible_q(bad, m.transition, m.initial_distribution)
    badz = z.copy()
    badz[-1, 0, 0, 0] += 1e-5
    assert not is_feasible_z(badz, m.initial_distribution)


@given(dims, st.floats(0, 1))
def test_values_linear_in_q(d, lam):
    m, pi = _instance(*d)
    pi2 = random_policy(np.random.default_rng(d[-1] + 1), *pi.shape)
    q1 = q_from_policy(pi, m.transition, m.initial_distribution)
    q2 = q_from_policy(pi2, m.transition, m.initial_distribution)
    blend = agent_values_from_q(lam * q1 + (1 - lam) * q2, m.reward)
    expect = lam * agent_values_from_q(q1, m.reward) + (1 - lam) * agent_values_from_q(q2, m.reward)
    np.testing.assert_allclose(blend, expect, atol=1e-12)


@given(dims)
def test_induced_transition_rows_sum_to_one(d):
    m, pi = _instance(*d)
    z = z_from_policy(pi, m.transition, m.initial_distribution)
    p = induced_transition(z)
    mass = z[:-1].sum(axis=-1) > 0
    np.testing.assert_allclose(p.sum(axis=-1)[mass], 1.0, atol=1e-12)
    np.testing.assert_allclose(p[mass], m.transition[mass], atol=1e-12)


def test_feasibility_checks_mu():
    m, pi = _instance(2, 2, 2, 2, 0)
    q = q_from_policy(pi, m.transition, np.array([0.5, 0.5]))
    assert not is_feasible_q(q, m.transition, m.initial_distribution)


@pytest.mark.parametrize("shape", [(1, 1, 2), (3, 2, 3)])
def test_zero_measure_gives_uniform(shape):
    np.testing.assert_allclose(policy_from_q(np.zeros(shape)), 1.0 / shape[-1])
