"""Score-function policy gradient for fairness objectives, tabular softmax policies."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fairness import MAX_MIN, FairnessObjective
from .mdp import EpisodeBatch, TabularMdp, Trajectory, exact_agent_values, sample_episodes
from .seeding import ALGORITHM_STREAM, make_rng


def softmax_policy(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class PgConfig:
    step_size: float = 0.1
    batch_size: int = 20
    iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.step_size < 0:
            raise ValueError("step_size must be non-negative")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("batch_size must be positive and iterations non-negative")


def returns_per_agent(trajectory: Trajectory) -> np.ndarray:
    return np.asarray(trajectory.rewards).sum(axis=0)


def score_functions(theta: np.ndarray, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Per-trajectory sum_h grad log pi(a_h|s_h) for softmax logits, shape (K, H, S, A).

    Only the visited row of each step is non-zero: onehot(a_h) - pi_h(.|s_h).
    """
    K, H = states.shape
    pi = softmax_policy(theta)
    out = np.zeros((K,) + theta.shape)
    ks = np.arange(K)
    for h in range(H):
        s = states[:, h]
        out[ks, h, s] -= pi[h, s]
        out[ks, h, s, actions[:, h]] += 1.0
    return out


def _as_batch(batch) -> EpisodeBatch:
    if isinstance(batch, EpisodeBatch):
        return batch
    trajs = list(batch)
    if not trajs:
        raise ValueError("gradient estimation needs at least one trajectory")
    return EpisodeBatch(
        np.stack([t.states for t in trajs]),
        np.stack([t.actions for t in trajs]),
        np.stack([np.asarray(t.rewards) for t in trajs]),
    )


def agent_coefficients(objective: FairnessObjective, returns: np.ndarray) -> np.ndarray:
    """Weight on each agent's score sum sum_tau R_i(tau) grad log pi(tau).

    max-min: 1/|D| on the batch-argmin agent (lowest index on ties), zero elsewhere;
    alpha (proportional is alpha = 1): |D|^(alpha-1) / (sum_tau R_i)^alpha.
    """
    K = returns.shape[0]
    totals = returns.sum(axis=0)
    if objective.kind == MAX_MIN:
        coef = np.zeros_like(totals)
        coef[int(np.argmin(totals))] = 1.0 / K
        return coef
    if np.any(totals <= 0):
        bad = int(np.flatnonzero(totals <= 0)[0])
        raise ValueError(f"agent {bad} has non-positive total return {totals[bad]:g} in the batch")
    a = objective.alpha
    return float(K) ** (a - 1.0) / totals**a


def estimate_gradient(objective: FairnessObjective, batch, theta: np.ndarray) -> np.ndarray:
    b = _as_batch(batch)
    if len(b) == 0:
        raise ValueError("gradient estimation needs at least one trajectory")
    returns = b.returns()  # (K, N)
    coef = agent_coefficients(objective, returns)
    weights = returns @ coef  # per-trajectory weight sum_i coef_i R_i(tau)
    return np.tensordot(weights, score_functions(theta, b.states, b.actions), axes=1)


@dataclass
class PgResult:
    fair_values: np.ndarray  # (iterations + 1,) exact fair value of pi_theta, before any update first
    agent_values: np.ndarray  # (iterations + 1, N)
    theta: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        N = self.agent_values.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "fair_value"] + [f"value_{i + 1}" for i in range(N)])
            for it in range(len(self.fair_values)):
                w.writerow([it, repr(float(self.fair_values[it]))] + [repr(float(x)) for x in self.agent_values[it]])


def run_policy_gradient(
    env: TabularMdp,
    objective: FairnessObjective,
    cfg: PgConfig | None = None,
    rng: np.random.Generator | None = None,
) -> PgResult:
    cfg = cfg or PgConfig()
    rng = rng if rng is not None else make_rng(cfg.seed, ALGORITHM_STREAM)
    theta = np.zeros((env.horizon, env.num_states, env.num_actions))
    fair = np.empty(cfg.iterations + 1)
    values = np.empty((cfg.iterations + 1, env.num_agents))

    def log(it):
        v = exact_agent_values(env, softmax_policy(theta))
        values[it] = v
        fair[it] = objective.guarded_value(v)

    log(0)
    for it in range(1, cfg.iterations + 1):
        batch = sample_episodes(env, softmax_policy(theta), rng, cfg.batch_size)
        theta = theta + cfg.step_size * estimate_gradient(objective, batch, theta)
        log(it)
    return PgResult(fair, values, theta)
