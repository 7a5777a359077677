import math

import numpy as np
import pytest
from conftest import m1_policy, make_m1, random_instance, random_policy
from hypothesis import given
from hypothesis import strategies as st

from fairmdp.fairness import alpha_fair, max_min, proportional
from fairmdp.mdp import Trajectory, exact_agent_values, sample_episodes, uniform_policy
from fairmdp.online import (
    OnlineState,
    confidence_model,
    confidence_widths,
    empirical_model,
    log_terms,
    mixture_policy,
    regret_curve,
    run_online,
    update_estimates,
    width_formulas,
)
from fairmdp.seeding import make_rng
from fairmdp.solver import SolverConfig

FAST = SolverConfig(max_iterations=100)


def test_log_terms_closed_form():
    L_p, L_r = log_terms(2, 2, 3, 2, 1000, 0.1)
    assert L_p == pytest.approx(math.log(2.88e6))
    assert L_r == pytest.approx(2 * math.log(720000))
    with pytest.raises(ValueError):
        log_terms(2, 2, 3, 2, 1000, 1.5)


def test_width_examples():
    L_p, L_r = log_terms(2, 2, 3, 2, 1000, 0.1)
    counts = np.full((3, 2, 2), 100.0)
    beta_p, beta_r = width_formulas(counts, np.full((2, 2, 2, 2), 0.5), L_p, L_r)
    assert beta_r[0, 0, 0] == pytest.approx(0.5194, abs=1e-4)
    assert beta_p[0, 0, 0, 0] == pytest.approx(1.0797, abs=1e-4)
    assert beta_p[0, 0, 0, 0] == pytest.approx(0.3857 + 0.6941, abs=2e-4)
    zero_p, zero_r = width_formulas(np.zeros((3, 2, 2)), np.full((2, 2, 2, 2), 0.5), L_p, L_r)
    assert zero_r[0, 0, 0] == pytest.approx(math.sqrt(L_r))


def test_single_update():
    m = random_instance(0)
    st_ = OnlineState.for_mdp(m, 10)
    t = Trajectory(np.array([0, 1, 1]), np.array([1, 0, 0]), np.full((3, 2), 0.5))
    update_estimates(st_, t)
    assert st_.visits[0, 0, 1] == 1 and st_.visits.sum() == 3
    assert st_.transition_counts[0, 0, 1, 1] == 1 and st_.transition_counts.sum() == 2
    assert st_.episode == 1 and st_.is_consistent()


def test_reward_average():
    st_ = OnlineState(2, 1, 2, 1, 10)
    for r in (0.4, 0.6):
        update_estimates(st_, Trajectory(np.array([0]), np.array([0]), np.array([[r, 0.2]])))
    _, r_bar = empirical_model(st_.visits, st_.transition_counts, st_.reward_sums)
    assert r_bar[0, 0, 0, 0] == pytest.approx(0.5)


def test_update_dimension_mismatch():
    st_ = OnlineState(2, 2, 2, 3, 10)
    with pytest.raises(ValueError):
        update_estimates(st_, Trajectory(np.array([0, 1]), np.array([0, 0]), np.ones((2, 2))))
    with pytest.raises(ValueError):
        update_estimates(st_, Trajectory(np.array([0, 1, 0]), np.array([0, 0, 0]), np.ones((3, 3))))


def test_estimates_converge():
    m = random_instance(1)
    st_ = OnlineState.for_mdp(m, 10_000)
    for t in sample_episodes(m, uniform_policy(3, 2, 2), make_rng(0), 10_000):
        update_estimates(st_, t)
    p_bar, _ = empirical_model(st_.visits, st_.transition_counts, st_.reward_sums)
    visited = st_.visits[:-1] > 0
    assert np.abs(p_bar - m.transition)[visited].max() <= 0.02
    assert st_.is_consistent()


@given(st.integers(0, 1000), st.integers(1, 30))
def test_counts_consistent_after_every_update(seed, n):
    m = random_instance(seed % 7, S=3, A=2, H=4)
    st_ = OnlineState.for_mdp(m, 100)
    for t in sample_episodes(m, uniform_policy(4, 3, 2), make_rng(seed), n):
        update_estimates(st_, t)
        assert st_.is_consistent()


def test_unvisited_rows_uniform_and_full_width():
    st_ = OnlineState(2, 3, 2, 2, 10)
    model = confidence_model(st_)
    np.testing.assert_allclose(model.p_bar, 1 / 3)
    L_p, L_r = log_terms(3, 2, 2, 2, 10, 0.1)
    np.testing.assert_allclose(model.beta_r, math.sqrt(L_r))
    beta_p, _ = confidence_widths(st_, width_scale=0.5)
    np.testing.assert_allclose(beta_p, 0.5 * model.beta_p)


def test_k1_run():
    m = random_instance(2)
    res = run_online(m, proportional(), 1, cfg=FAST, seed=0)
    assert len(res) == 1 and len(res.trajectories) == 1
    assert res.final_model.counts.sum() == 3


def test_run_is_reproducible():
    m = random_instance(3)
    a = run_online(m, max_min(), 15, cfg=FAST, seed=4)
    b = run_online(m, max_min(), 15, cfg=FAST, seed=4)
    np.testing.assert_array_equal(a.fair_values, b.fair_values)
    np.testing.assert_array_equal(a.policies, b.policies)
    c = run_online(m, max_min(), 15, cfg=FAST, seed=5)
    assert not all(np.array_equal(x.states, y.states) for x, y in zip(a.trajectories, c.trajectories))


def test_run_logs_exact_values():
    m = random_instance(4)
    f = alpha_fair(2)
    res = run_online(m, f, 5, cfg=FAST, seed=1)
    for k in range(5):
        np.testing.assert_allclose(res.agent_values[k], exact_agent_values(m, res.policies[k]))
        assert res.fair_values[k] == pytest.approx(f.evaluate(res.agent_values[k]))


def test_csv_columns(tmp_path):
    m = random_instance(5)
    res = run_online(m, proportional(), 4, cfg=FAST, seed=0)
    path = tmp_path / "run.csv"
    res.to_csv(path, 1.0)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,fair_value,optimal_value,regret,optimistic_objective,solver_gap"
    assert len(lines) == 5 and lines[1].startswith("1,")


def test_regret_examples():
    np.testing.assert_array_equal(regret_curve([1.0, 1.0, 1.0], 1.0), [0, 0, 0])
    np.testing.assert_allclose(regret_curve([0.8] * 4, 1.0), [0.2, 0.4, 0.6, 0.8])
    r = regret_curve(np.random.default_rng(0).uniform(0, 1, 50), 1.0)
    assert np.all(np.diff(r) >= 0)


def test_mixture_examples():
    m = make_m1()
    one = mixture_policy([m1_policy(0.3)])
    np.testing.assert_allclose(one.agent_values(m), exact_agent_values(m, m1_policy(0.3)))
    rng = make_rng(0)
    np.testing.assert_array_equal(one.draw(rng), m1_policy(0.3))
    mix = mixture_policy([m1_policy(1.0), m1_policy(0.0)])
    np.testing.assert_allclose(mix.agent_values(m), [0.55, 0.55])
    with pytest.raises(ValueError):
        mixture_policy([])


def test_mixture_jensen():
    rng = np.random.default_rng(0)
    for f in (max_min(), proportional(), alpha_fair(2)):
        for seed in range(100):
            m = random_instance(seed % 10)
            pols = [random_policy(rng, 3, 2, 2) for _ in range(2)]
            mix = mixture_policy(pols)
            mean_f = np.mean([f.evaluate(exact_agent_values(m, p)) for p in pols])
            assert mix.fair_value(m, f) >= mean_f - 1e-12


def test_mixture_episode_follows_one_member():
    m = random_instance(6)
    det = np.zeros((3, 2, 2))
    det[..., 1] = 1.0
    mix = mixture_policy([det, det])
    t = mix.sample_episode(m, make_rng(2))
    assert (t.actions == 1).all()
