"""Episodic optimistic learning of fair policies.

Each episode builds the empirical model and confidence widths from all past
trajectories, solves the optimistic program over the band polytope,
executes the resulting policy for one episode and records the outcome.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fairness import FairnessObjective
from .mdp import TabularMdp, Trajectory, exact_agent_values, sample_episodes
from .occupancy import policy_from_z
from .seeding import ALGORITHM_STREAM, make_rng
from .solver import ConfidenceModel, SolverConfig, solve_fair_extended

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("k", "fair_value", "optimal_value", "regret", "optimistic_objective", "solver_gap")


def log_terms(S: int, A: int, H: int, N: int, K: int, delta: float) -> tuple[float, float]:
    """Logarithmic factors (L_p, L_r) of the transition and reward widths."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    L_p = math.log(12 * S * S * A * H * K / delta)
    L_r = 2.0 * math.log(3 * S * A * H * N * K / delta)
    return L_p, L_r


def width_formulas(counts: np.ndarray, p_bar: np.ndarray, L_p: float, L_r: float):
    """Empirical-Bernstein transition widths and Hoeffding reward widths.

    ``counts`` is (H, S, A) and ``p_bar`` (H-1, S, A, S). Zero counts use a
    denominator of one.
    """
    n = np.maximum(counts, 1.0)
    beta_r = np.sqrt(L_r / n)
    n_p = n[:-1, :, :, None]
    beta_p = np.sqrt(4.0 * p_bar * (1.0 - p_bar) * L_p / n_p) + 14.0 * L_p / (3.0 * n_p)
    return beta_p, beta_r


def empirical_model(visits, transition_counts, reward_sums):
    """Empirical kernel and rewards; unvisited kernel rows become uniform."""
    S = visits.shape[1]
    n = np.maximum(visits, 1.0)
    r_bar = reward_sums / n[:, None]
    n_p = visits[:-1, :, :, None]
    p_bar = np.full(transition_counts.shape, 1.0 / S)
    np.divide(transition_counts, n_p, out=p_bar, where=n_p > 0)
    return p_bar, r_bar


@dataclass
class OnlineState:
    """Sufficient statistics of the observed trajectories."""

    num_agents: int
    num_states: int
    num_actions: int
    horizon: int
    num_episodes: int  # planned K, enters the width constants
    delta: float = 0.1
    episode: int = 0
    visits: np.ndarray = field(default=None)
    transition_counts: np.ndarray = field(default=None)
    reward_sums: np.ndarray = field(default=None)

    def __post_init__(self):
        H, N, S, A = self.horizon, self.num_agents, self.num_states, self.num_actions
        if self.visits is None:
            self.visits = np.zeros((H, S, A))
        if self.transition_counts is None:
            self.transition_counts = np.zeros((max(H - 1, 0), S, A, S))
        if self.reward_sums is None:
            self.reward_sums = np.zeros((H, N, S, A))

    @classmethod
    def for_mdp(cls, mdp: TabularMdp, num_episodes: int, delta: float = 0.1) -> "OnlineState":
        return cls(mdp.num_agents, mdp.num_states, mdp.num_actions, mdp.horizon, num_episodes, delta)

    def is_consistent(self) -> bool:
        return bool(np.array_equal(self.transition_counts.sum(axis=-1), self.visits[:-1]))


def update_estimates(state: OnlineState, trajectory: Trajectory) -> OnlineState:
    """Add one trajectory's counts and rewards along the visited path (in place)."""
    H = state.horizon
    s, a, r = trajectory.states, trajectory.actions, np.asarray(trajectory.rewards)
    if len(s) != H or r.shape != (H, state.num_agents):
        raise ValueError(
            f"trajectory of length {len(s)} with rewards {r.shape} does not match "
            f"horizon {H} and {state.num_agents} agents"
        )
    if np.any(s >= state.num_states) or np.any(a >= state.num_actions):
        raise ValueError("trajectory indices out of range for this state")
    steps = np.arange(H)
    state.visits[steps, s, a] += 1
    state.reward_sums[steps, :, s, a] += r
    if H > 1:
        state.transition_counts[steps[:-1], s[:-1], a[:-1], s[1:]] += 1
    state.episode += 1
    return state


def confidence_widths(state: OnlineState, width_scale: float = 1.0):
    """Widths (beta_p, beta_r) from the current counts; ``width_scale`` is a tuning knob, 1.0 by default."""
    L_p, L_r = log_terms(
        state.num_states, state.num_actions, state.horizon, state.num_agents, state.num_episodes, state.delta
    )
    p_bar, _ = empirical_model(state.visits, state.transition_counts, state.reward_sums)
    beta_p, beta_r = width_formulas(state.visits, p_bar, L_p, L_r)
    return width_scale * beta_p, width_scale * beta_r


def confidence_model(state: OnlineState, width_scale: float = 1.0) -> ConfidenceModel:
    p_bar, r_bar = empirical_model(state.visits, state.transition_counts, state.reward_sums)
    beta_p, beta_r = confidence_widths(state, width_scale)
    return ConfidenceModel(state.visits.copy(), p_bar, r_bar, beta_p, beta_r)


@dataclass
class RunResult:
    fair_values: np.ndarray  # (K,) exact fair value of the executed policy
    agent_values: np.ndarray  # (K, N)
    optimistic_objectives: np.ndarray  # (K,)
    solver_gaps: np.ndarray  # (K,)
    converged: np.ndarray  # (K,) bool
    policies: np.ndarray  # (K, H, S, A)
    trajectories: list
    final_model: ConfidenceModel

    def __len__(self) -> int:
        return len(self.fair_values)

    def to_csv(self, path: str | Path, optimal_value: float) -> None:
        regret = regret_curve(self, optimal_value)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for k in range(len(self)):
                w.writerow(
                    [
                        k + 1,
                        repr(float(self.fair_values[k])),
                        repr(float(optimal_value)),
                        repr(float(regret[k])),
                        repr(float(self.optimistic_objectives[k])),
                        repr(float(self.solver_gaps[k])),
                    ]
                )


def run_online(
    env: TabularMdp,
    objective: FairnessObjective,
    num_episodes: int,
    delta: float = 0.1,
    cfg: SolverConfig | None = None,
    seed: int = 0,
    width_scale: float = 1.0,
    rng: np.random.Generator | None = None,
) -> RunResult:
    """Run the optimistic loop for ``num_episodes`` episodes on ``env``.

    The learner only sees sampled trajectories; the true model is read
    solely to log the exact fair value of each executed policy.
    """
    cfg = cfg or SolverConfig()
    rng = rng if rng is not None else make_rng(seed, ALGORITHM_STREAM)
    state = OnlineState.for_mdp(env, num_episodes, delta)
    K, H, S, A, N = num_episodes, env.horizon, env.num_states, env.num_actions, env.num_agents
    fair = np.empty(K)
    values = np.empty((K, N))
    optimistic = np.empty(K)
    gaps = np.empty(K)
    converged = np.zeros(K, dtype=bool)
    policies = np.empty((K, H, S, A))
    trajectories = []
    model = confidence_model(state, width_scale)
    for k in range(K):
        res = solve_fair_extended(model, objective, env.initial_distribution, cfg)
        policy = policy_from_z(res.occupancy)
        traj = sample_episodes(env, policy, rng, 1)[0]
        update_estimates(state, traj)
        model = confidence_model(state, width_scale)

        v = exact_agent_values(env, policy)
        values[k] = v
        fair[k] = objective.guarded_value(v)
        optimistic[k] = res.value
        gaps[k] = res.gap
        converged[k] = res.converged
        policies[k] = policy
        trajectories.append(traj)
    missed = int((~converged).sum())
    if missed:
        logger.warning("solver did not reach tolerance in %d of %d episodes", missed, K)
    return RunResult(fair, values, optimistic, gaps, converged, policies, trajectories, model)


def regret_curve(result, optimal_value: float) -> np.ndarray:
    """Cumulative regret sum_{j<=k} (optimal_value - fair value of episode j)."""
    fair = result.fair_values if hasattr(result, "fair_values") else np.asarray(result, dtype=float)
    return np.cumsum(optimal_value - fair)


class MixturePolicy:
    """Draws one member policy uniformly per episode and follows it throughout."""

    def __init__(self, policies):
        policies = [np.asarray(p, dtype=float) for p in policies]
        if not policies:
            raise ValueError("a mixture needs at least one policy")
        shape = policies[0].shape
        if any(p.shape != shape for p in policies):
            raise ValueError("all member policies must have the same shape")
        self.policies = np.stack(policies)

    def __len__(self) -> int:
        return len(self.policies)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.policies[rng.integers(len(self.policies))]

    def sample_episode(self, mdp: TabularMdp, rng: np.random.Generator) -> Trajectory:
        return sample_episodes(mdp, self.draw(rng), rng, 1)[0]

    def agent_values(self, mdp: TabularMdp) -> np.ndarray:
        return np.mean([exact_agent_values(mdp, p) for p in self.policies], axis=0)

    def fair_value(self, mdp: TabularMdp, objective: FairnessObjective) -> float:
        return objective.guarded_value(self.agent_values(mdp))


def mixture_policy(policies) -> MixturePolicy:
    return MixturePolicy(policies)
