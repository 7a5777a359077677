import numpy as np
import pytest
from conftest import m1_policy, random_policy

from fairmdp.mdp import (
    RandomMdpConfig,
    TabularMdp,
    exact_agent_values,
    generate_random_mdp,
    observe_reward,
    policy_values,
    sample_episode,
    sample_episodes,
    uniform_policy,
)
from fairmdp.occupancy import q_from_policy
from fairmdp.seeding import make_rng


def test_generate_default_mdp_defaults_valid(default_mdp):
    assert (default_mdp.num_agents, default_mdp.num_states, default_mdp.num_actions, default_mdp.horizon) == (2, 2, 2, 3)
    assert default_mdp.reward.min() >= 0.15 and default_mdp.reward.max() <= 0.95
    np.testing.assert_allclose(default_mdp.transition.sum(axis=-1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(default_mdp.initial_distribution, [1.0, 0.0])


def test_generate_deterministic():
    a = generate_random_mdp(RandomMdpConfig(seed=7))
    b = generate_random_mdp(RandomMdpConfig(seed=7))
    np.testing.assert_array_equal(a.transition, b.transition)
    np.testing.assert_array_equal(a.reward, b.reward)
    c = generate_random_mdp(RandomMdpConfig(seed=8))
    assert not np.array_equal(a.reward, c.reward)


@pytest.mark.parametrize("seed", range(20))
def test_generated_rows_normalized(seed):
    m = generate_random_mdp(RandomMdpConfig(num_states=3, num_actions=3, horizon=4, seed=seed))
    np.testing.assert_allclose(m.transition.sum(axis=-1), 1.0, atol=1e-9)


def test_config_rejects_bad_bounds():
    with pytest.raises(ValueError, match="below epsilon/H"):
        generate_random_mdp(RandomMdpConfig(reward_low=0.05))
    with pytest.raises(ValueError, match="must not exceed 1"):
        generate_random_mdp(RandomMdpConfig(reward_high=0.99))


def test_mdp_validation(m1):
    with pytest.raises(ValueError):
        TabularMdp(np.zeros((0, 1, 2, 1)), np.full((1, 2, 1, 2), 0.01), np.array([1.0]))
    with pytest.raises(ValueError):
        TabularMdp(np.full((1, 1, 2, 1), 0.5), np.full((2, 2, 1, 2), 0.5), np.array([1.0]))
    with pytest.raises(ValueError):
        m1.reward[0, 0, 0, 0] = 0.3  # read-only


def test_json_roundtrip(tmp_path, default_mdp):
    path = tmp_path / "m.json"
    default_mdp.save(path)
    back = TabularMdp.load(path)
    np.testing.assert_array_equal(back.transition, default_mdp.transition)
    np.testing.assert_array_equal(back.reward, default_mdp.reward)
    assert back.seed == default_mdp.seed and back.noise_half_width == default_mdp.noise_half_width


def test_observe_reward_zero_noise(m1):
    rng = make_rng(0)
    assert observe_reward(m1, 0, 0, 0, 1, rng) == 0.1


def test_observe_reward_noise_range_and_mean():
    m = TabularMdp(np.zeros((0, 1, 1, 1)), np.full((1, 1, 1, 1), 0.5), np.array([1.0]), noise_half_width=0.05)
    rng = make_rng(3)
    draws = np.array([observe_reward(m, 0, 0, 0, 0, rng) for _ in range(2000)])
    assert draws.min() >= 0.45 and draws.max() <= 0.55
    # bulk Monte-Carlo mean through the vectorized sampler
    batch = sample_episodes(m, np.ones((1, 1, 1)), make_rng(4), 1_000_000)
    assert abs(batch.rewards.mean() - 0.5) < 0.001


def test_sample_m1_deterministic(m1):
    t = sample_episode(m1, m1_policy(1.0), make_rng(0))
    np.testing.assert_array_equal(t.rewards[0], [1.0, 0.1])
    assert t.actions[0] == 0 and t.states[0] == 0


def test_sample_m1_uniform_frequency(m1):
    b = sample_episodes(m1, m1_policy(0.5), make_rng(1), 100_000)
    assert abs((b.actions[:, 0] == 0).mean() - 0.5) < 0.01


def test_deterministic_chain_unique_trajectory():
    p = np.zeros((2, 2, 1, 2))
    p[:, :, 0, 1] = 1.0
    m = TabularMdp(p, np.full((3, 1, 2, 1), 0.5), np.array([1.0, 0.0]))
    b = sample_episodes(m, uniform_policy(3, 2, 1), make_rng(0), 50)
    assert (b.states == [0, 1, 1]).all()


def test_exact_values_m1(m1):
    np.testing.assert_allclose(exact_agent_values(m1, m1_policy(0.5)), [0.55, 0.55])


def test_single_step_value_formula():
    rng = np.random.default_rng(0)
    r = rng.uniform(0.2, 1.0, (1, 3, 2, 4))
    m = TabularMdp(np.zeros((0, 2, 4, 2)), r, np.array([0.0, 1.0]))
    pi = random_policy(rng, 1, 2, 4)
    np.testing.assert_allclose(exact_agent_values(m, pi), r[0][:, 1] @ pi[0, 1])


def test_values_match_monte_carlo(default_mdp):
    pi = random_policy(np.random.default_rng(5), 3, 2, 2)
    b = sample_episodes(default_mdp, pi, make_rng(9), 100_000)
    ret = b.returns()
    se = ret.std(axis=0) / np.sqrt(len(b))
    assert np.all(np.abs(ret.mean(axis=0) - exact_agent_values(default_mdp, pi)) <= 3 * se)


def test_values_at_least_epsilon():
    rng = np.random.default_rng(11)
    for seed in range(30):
        m = generate_random_mdp(RandomMdpConfig(num_agents=3, num_states=3, num_actions=2, horizon=3, seed=seed))
        assert exact_agent_values(m, random_policy(rng, 3, 3, 2)).min() >= m.epsilon - 1e-12


def test_values_linear_in_reward(default_mdp):
    pi = random_policy(np.random.default_rng(2), 3, 2, 2)
    r2 = np.array(default_mdp.reward)
    r2[:, 0] *= 2
    v = policy_values(default_mdp.reward, default_mdp.transition, pi, default_mdp.initial_distribution)
    v2 = policy_values(r2, default_mdp.transition, pi, default_mdp.initial_distribution)
    np.testing.assert_allclose(v2, [2 * v[0], v[1]], rtol=1e-12)


def test_visit_frequencies_chi_square(default_mdp):
    from scipy.stats import chisquare

    pi = random_policy(np.random.default_rng(8), 3, 2, 2)
    q = q_from_policy(pi, default_mdp.transition, default_mdp.initial_distribution)
    n = 100_000
    b = sample_episodes(default_mdp, pi, make_rng(12), n)
    for h in (1, 2):
        counts = np.bincount(b.states[:, h] * 2 + b.actions[:, h], minlength=4)
        exp = q[h].ravel() * n
        keep = exp > 0
        assert chisquare(counts[keep], exp[keep]).pvalue > 1e-4
