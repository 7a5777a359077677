"""Offline fair learning from a fixed dataset with pessimistic rewards."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fairness import FairnessObjective
from .mdp import EpisodeBatch, TabularMdp, exact_agent_values, policy_values, sample_episodes, uniform_policy
from .occupancy import policy_from_q
from .online import empirical_model, log_terms, width_formulas
from .solver import SolveResult, SolverConfig, solve_fair_plan


class AssumptionViolationWarning(UserWarning):
    """Some agent's pessimistic value fell below the epsilon floor."""


@dataclass
class Dataset:
    """Logged episodes plus the dimensions needed to interpret them."""

    states: np.ndarray  # (K, H)
    actions: np.ndarray  # (K, H)
    rewards: np.ndarray  # (K, H, N)
    num_states: int
    num_actions: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.rewards.ndim != 3 or self.states.shape != self.rewards.shape[:2] or self.actions.shape != self.states.shape:
            raise ValueError("dataset arrays have inconsistent shapes")
        if self.states.size and (self.states.max() >= self.num_states or self.actions.max() >= self.num_actions):
            raise ValueError("dataset indices exceed the declared dimensions")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    @property
    def num_agents(self) -> int:
        return self.rewards.shape[2]

    def episodes(self):
        yield from EpisodeBatch(self.states, self.actions, self.rewards)

    @classmethod
    def from_batch(cls, batch: EpisodeBatch, num_states: int, num_actions: int, provenance=None) -> "Dataset":
        return cls(batch.states, batch.actions, batch.rewards, num_states, num_actions, dict(provenance or {}))

    def save_jsonl(self, path: str | Path) -> None:
        """First line holds dimensions and provenance, then one episode per line."""
        meta = {
            "meta": {
                "num_states": self.num_states,
                "num_actions": self.num_actions,
                "horizon": self.horizon,
                "num_agents": self.num_agents,
                "provenance": self.provenance,
            }
        }
        with open(path, "w") as fh:
            fh.write(json.dumps(meta) + "\n")
            for k in range(len(self)):
                ep = {
                    "states": self.states[k].tolist(),
                    "actions": self.actions[k].tolist(),
                    "rewards": self.rewards[k].tolist(),
                }
                fh.write(json.dumps(ep) + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "Dataset":
        meta = None
        states, actions, rewards = [], [], []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "meta" in rec:
                    meta = rec["meta"]
                    continue
                states.append(rec["states"])
                actions.append(rec["actions"])
                rewards.append(rec["rewards"])
        if not states:
            raise ValueError(f"{path}: dataset contains no episodes")
        states, actions = np.asarray(states), np.asarray(actions)
        if meta is None:
            # dimensions inferred from the largest index seen
            meta = {"num_states": int(states.max()) + 1, "num_actions": int(actions.max()) + 1}
        return cls(
            states, actions, np.asarray(rewards, dtype=float),
            int(meta["num_states"]), int(meta["num_actions"]), meta.get("provenance", {}),
        )


def generate_dataset(
    mdp: TabularMdp, num_episodes: int, rng: np.random.Generator, policy: np.ndarray | None = None, seed=None
) -> Dataset:
    """Log episodes of ``policy`` (uniform by default) on ``mdp``."""
    if policy is None:
        policy = uniform_policy(mdp.horizon, mdp.num_states, mdp.num_actions)
        label = "uniform"
    else:
        label = "custom"
    batch = sample_episodes(mdp, policy, rng, num_episodes)
    return Dataset.from_batch(
        batch, mdp.num_states, mdp.num_actions, {"behavior_policy": label, "seed": seed, "episodes": num_episodes}
    )


@dataclass
class PessimisticModel:
    counts: np.ndarray  # (H, S, A)
    p_bar: np.ndarray  # (H-1, S, A, S)
    r_bar: np.ndarray  # (H, N, S, A)
    r_lower: np.ndarray  # (H, N, S, A)
    b_r: np.ndarray  # (H, S, A)
    b_p: np.ndarray  # (H-1, S, A, S)
    initial_distribution: np.ndarray  # empirical start-state frequencies
    delta: float
    epsilon: float

    @property
    def horizon(self) -> int:
        return self.r_bar.shape[0]

    def transition_penalty(self) -> np.ndarray:
        """H * sum_{s'} b_p per (h, s, a); zero at the last step, which has no successor."""
        H = self.horizon
        pen = np.zeros(self.counts.shape)
        if H > 1:
            pen[:-1] = H * self.b_p.sum(axis=-1)
        return pen

    def intrinsic_uncertainty(self) -> np.ndarray:
        return self.b_r + self.transition_penalty()


def pessimistic_reward(r_bar, b_r, penalty, epsilon: float) -> np.ndarray:
    """max(r_bar - b_r, eps/H) - penalty, floored at -H so values stay finite."""
    H = r_bar.shape[0]
    lower = np.maximum(r_bar - b_r[:, None], epsilon / H) - penalty[:, None]
    return np.maximum(lower, -float(H))


def build_pessimistic_model(data: Dataset, delta: float = 0.1, epsilon: float = 0.1, width_scale: float = 1.0) -> PessimisticModel:
    """Empirical model of the dataset with widths at the dataset's counts.

    ``width_scale`` multiplies both widths; 0 recovers the plain empirical model.
    """
    if len(data) == 0:
        raise ValueError("cannot build a model from an empty dataset")
    K, H = data.states.shape
    S, A, N = data.num_states, data.num_actions, data.num_agents
    visits = np.zeros((H, S, A))
    reward_sums = np.zeros((H, N, S, A))
    transition_counts = np.zeros((max(H - 1, 0), S, A, S))
    steps = np.broadcast_to(np.arange(H), (K, H))
    np.add.at(visits, (steps, data.states, data.actions), 1.0)
    for i in range(N):
        np.add.at(reward_sums[:, i], (steps, data.states, data.actions), data.rewards[:, :, i])
    if H > 1:
        np.add.at(
            transition_counts,
            (steps[:, :-1], data.states[:, :-1], data.actions[:, :-1], data.states[:, 1:]),
            1.0,
        )
    p_bar, r_bar = empirical_model(visits, transition_counts, reward_sums)
    L_p, L_r = log_terms(S, A, H, N, K, delta)
    b_p, b_r = width_formulas(visits, p_bar, L_p, L_r)
    b_p, b_r = width_scale * b_p, width_scale * b_r
    mu = np.bincount(data.states[:, 0], minlength=S) / K
    model = PessimisticModel(visits, p_bar, r_bar, None, b_r, b_p, mu, delta, epsilon)
    model.r_lower = pessimistic_reward(r_bar, b_r, model.transition_penalty(), epsilon)
    return model


@dataclass
class OfflineResult:
    policy: np.ndarray
    value: float  # fairness of the pessimistic agent values (floor-guarded)
    agent_values: np.ndarray  # pessimistic values under (r_lower, p_bar)
    assumption_holds: bool
    solve: SolveResult


def solve_offline(
    model: PessimisticModel,
    objective: FairnessObjective,
    initial_distribution: np.ndarray | None = None,
    cfg: SolverConfig | None = None,
) -> OfflineResult:
    mu = model.initial_distribution if initial_distribution is None else np.asarray(initial_distribution, dtype=float)
    res = solve_fair_plan(model.r_lower, model.p_bar, mu, objective, cfg)
    policy = policy_from_q(res.occupancy)
    values = policy_values(model.r_lower, model.p_bar, policy, mu)
    ok = bool(np.all(values >= objective.epsilon))
    if not ok:
        warnings.warn(
            f"pessimistic agent values {np.round(values, 4).tolist()} fall below epsilon={objective.epsilon:g}",
            AssumptionViolationWarning,
            stacklevel=2,
        )
    return OfflineResult(policy, objective.guarded_value(values), values, ok, res)


def evaluate_suboptimality(policy: np.ndarray, truth: TabularMdp, objective: FairnessObjective, oracle_value: float) -> float:
    return float(oracle_value - objective.guarded_value(exact_agent_values(truth, policy)))


def suboptimality_bound(model: PessimisticModel, objective: FairnessObjective, optimal_occupancy: np.ndarray) -> float:
    """2 N C_F times the intrinsic uncertainty accumulated along the optimal occupancy."""
    N = model.r_bar.shape[1]
    expected = float((optimal_occupancy * model.intrinsic_uncertainty()).sum())
    return 2.0 * N * objective.lipschitz_constant(N) * expected
