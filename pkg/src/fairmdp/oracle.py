"""Brute-force ground truth, independent of the convex solver.

The oracle enumerates stochastic policies whose rows lie on a regular grid
of the action simplex and evaluates each by forward occupancy propagation.
It never calls the Frank-Wolfe code, so the two can be cross-checked.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .fairness import FairnessObjective
from .mdp import TabularMdp, policy_values

DEFAULT_BUDGET = 2_000_000
_CHUNK = 65_536


class OracleBudgetError(RuntimeError):
    pass


@dataclass
class OracleResult:
    value: float
    policy: np.ndarray
    error_bound: float  # N * C_F * H * grid_step for Lipschitz objectives
    num_policies: int


def simplex_grid(num_actions: int, grid_step: float) -> np.ndarray:
    """All distributions over ``num_actions`` with coordinates on multiples of 1/m."""
    if not 0 < grid_step <= 0.5 + 1e-12:
        raise ValueError("grid step must lie in (0, 0.5]")
    m = max(1, round(1.0 / grid_step))
    rows = []
    # stars and bars: choose A-1 bar positions among m + A - 1 slots
    for bars in itertools.combinations(range(m + num_actions - 1), num_actions - 1):
        edges = (-1,) + bars + (m + num_actions - 1,)
        rows.append([edges[j + 1] - edges[j] - 1 for j in range(num_actions)])
    return np.asarray(rows, dtype=float) / m


def reachable_rows(mdp: TabularMdp) -> np.ndarray:
    """(H, S) mask of states some policy reaches with positive probability."""
    reach = np.zeros((mdp.horizon, mdp.num_states), dtype=bool)
    reach[0] = mdp.initial_distribution > 0
    for h in range(mdp.horizon - 1):
        reach[h + 1] = (mdp.transition[h][reach[h]] > 0).any(axis=(0, 1))
    return reach


def grid_size(mdp: TabularMdp, grid_step: float) -> int:
    """Number of grid policies; rows at unreachable states are pinned to uniform."""
    m = max(1, round(1.0 / grid_step))
    per_row = math.comb(m + mdp.num_actions - 1, mdp.num_actions - 1)
    return per_row ** int(reachable_rows(mdp).sum())


def batch_values(mdp: TabularMdp, policies: np.ndarray) -> np.ndarray:
    """Agent values for a stack of policies (B, H, S, A) -> (B, N)."""
    B = policies.shape[0]
    d = np.broadcast_to(mdp.initial_distribution, (B, mdp.num_states))
    out = np.zeros((B, mdp.num_agents))
    for h in range(mdp.horizon):
        q = d[:, :, None] * policies[:, h]
        out += np.einsum("bsa,nsa->bn", q, mdp.reward[h])
        if h < mdp.horizon - 1:
            d = np.einsum("bsa,sat->bt", q, mdp.transition[h])
    return out


def brute_force_oracle(
    mdp: TabularMdp, objective: FairnessObjective, grid_step: float, budget: int = DEFAULT_BUDGET
) -> OracleResult:
    total = grid_size(mdp, grid_step)
    if total > budget:
        raise OracleBudgetError(
            f"grid of {total} policies exceeds the budget of {budget}; use a coarser grid step"
        )
    grid = simplex_grid(mdp.num_actions, grid_step)
    G = len(grid)
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    free = np.flatnonzero(reachable_rows(mdp).ravel())
    radix = G ** np.arange(len(free), dtype=np.int64)

    def expand(idx: np.ndarray) -> np.ndarray:
        policies = np.full((len(idx), H * S, A), 1.0 / A)
        digits = (idx[:, None] // radix[None, :]) % G
        policies[:, free] = grid[digits]
        return policies.reshape(len(idx), H, S, A)

    best_val, best_idx = -math.inf, 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        vals = objective.evaluate_many(batch_values(mdp, expand(idx)))
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), int(idx[j])
    policy = expand(np.array([best_idx], dtype=np.int64))[0]
    step = 1.0 / max(1, round(1.0 / grid_step))
    bound = mdp.num_agents * objective.lipschitz_constant(mdp.num_agents) * H * step
    return OracleResult(best_val, policy, bound, total)


def value_difference_sides(
    reward_a: np.ndarray,
    transition_a: np.ndarray,
    reward_b: np.ndarray,
    transition_b: np.ndarray,
    policy: np.ndarray,
    initial_distribution: np.ndarray,
):
    """Both sides of the value-difference identity for two models and one policy.

    Left: V_a - V_b. Right: expectation under (transition_b, policy) of the
    reward gap plus the kernel gap applied to the next-step values of model a.
    Returns per-agent arrays ``(lhs, rhs)``.
    """
    H, N, S, A = reward_a.shape
    lhs = policy_values(reward_a, transition_a, policy, initial_distribution) - policy_values(
        reward_b, transition_b, policy, initial_distribution
    )
    # per-step state values of model a, V_a[h] shape (N, S), V_a[H] = 0
    v_a = np.zeros((H + 1, N, S))
    for h in range(H - 1, -1, -1):
        qv = reward_a[h]
        if h < H - 1:
            qv = qv + np.einsum("sat,nt->nsa", transition_a[h], v_a[h + 1])
        v_a[h] = np.einsum("nsa,sa->ns", qv, policy[h])
    rhs = np.zeros(N)
    d = np.asarray(initial_distribution, dtype=float)
    for h in range(H):
        occ = d[:, None] * policy[h]  # occupancy under model b
        gap = reward_a[h] - reward_b[h]
        if h < H - 1:
            gap = gap + np.einsum("sat,nt->nsa", transition_a[h] - transition_b[h], v_a[h + 1])
            d = np.einsum("sa,sat->t", occ, transition_b[h])
        rhs += np.einsum("nsa,sa->n", gap, occ)
    return lhs, rhs
