"""Occupancy measures and their conversions to and from policies.

``q[h, s, a]`` is the probability of visiting (s, a) at step h and
``z[h, s, a, s']`` additionally records the next state. The last step has no
kernel; its ``z`` slice spreads mass uniformly over ``s'`` so the shape stays
(H, S, A, S) and marginals are still exact.
"""

from __future__ import annotations

import numpy as np


def q_from_policy(policy: np.ndarray, transition: np.ndarray, initial_distribution: np.ndarray) -> np.ndarray:
    H, S, A = policy.shape
    q = np.empty((H, S, A))
    d = np.asarray(initial_distribution, dtype=float)
    for h in range(H):
        q[h] = d[:, None] * policy[h]
        if h < H - 1:
            d = np.einsum("sa,sat->t", q[h], transition[h])
    return q


def z_from_q(q: np.ndarray, transition: np.ndarray) -> np.ndarray:
    H, S, A = q.shape
    z = np.empty((H, S, A, S))
    if H > 1:
        z[:-1] = q[:-1, :, :, None] * transition
    z[-1] = q[-1, :, :, None] / S
    return z


def z_from_policy(policy: np.ndarray, transition: np.ndarray, initial_distribution: np.ndarray) -> np.ndarray:
    return z_from_q(q_from_policy(policy, transition, initial_distribution), transition)


def marginalize_z(z: np.ndarray) -> np.ndarray:
    return z.sum(axis=-1)


def agent_values_from_q(q: np.ndarray, reward: np.ndarray) -> np.ndarray:
    """Per-agent value as the linear functional sum_{h,s,a} r[h,i,s,a] q[h,s,a]."""
    return np.einsum("hnsa,hsa->n", reward, q)


def _normalize_rows(mass: np.ndarray) -> np.ndarray:
    total = mass.sum(axis=-1, keepdims=True)
    A = mass.shape[-1]
    out = np.full(mass.shape, 1.0 / A)
    np.divide(mass, total, out=out, where=total > 0)
    return out


def policy_from_q(q: np.ndarray) -> np.ndarray:
    """Row-normalize; rows with no mass become uniform."""
    return _normalize_rows(np.maximum(q, 0.0))


def policy_from_z(z: np.ndarray) -> np.ndarray:
    return policy_from_q(marginalize_z(z))


def induced_transition(z: np.ndarray) -> np.ndarray:
    """Kernel implied by z on steps 0..H-2; zero-mass rows are uniform."""
    return _normalize_rows(np.maximum(z[:-1], 0.0))


def flow_violation_q(q: np.ndarray, transition: np.ndarray, initial_distribution: np.ndarray) -> float:
    """Largest violation of the occupancy constraints (non-negativity, start mass, flow)."""
    worst = max(0.0, float(-q.min()))
    worst = max(worst, float(np.abs(q[0].sum(axis=1) - initial_distribution).max()))
    for h in range(1, q.shape[0]):
        inflow = np.einsum("sa,sat->t", q[h - 1], transition[h - 1])
        worst = max(worst, float(np.abs(q[h].sum(axis=1) - inflow).max()))
    return worst


def flow_violation_z(z: np.ndarray, initial_distribution: np.ndarray) -> float:
    worst = max(0.0, float(-z.min()))
    worst = max(worst, float(np.abs(z[0].sum(axis=(1, 2)) - initial_distribution).max()))
    for h in range(1, z.shape[0]):
        inflow = z[h - 1].sum(axis=(0, 1))
        worst = max(worst, float(np.abs(z[h].sum(axis=(1, 2)) - inflow).max()))
    return worst


def is_feasible_q(q, transition, initial_distribution, atol: float = 1e-6) -> bool:
    if flow_violation_q(q, transition, initial_distribution) > atol:
        return False
    # redundant given the constraints above; kept as a sanity check
    return bool(np.allclose(q.sum(axis=(1, 2)), 1.0, atol=atol))


def is_feasible_z(z, initial_distribution, atol: float = 1e-6) -> bool:
    if flow_violation_z(z, initial_distribution) > atol:
        return False
    return bool(np.allclose(z.sum(axis=(1, 2, 3)), 1.0, atol=atol))
