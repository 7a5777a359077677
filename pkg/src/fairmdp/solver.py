"""Concave maximization of fairness objectives over occupancy polytopes.

Frank-Wolfe is run directly on occupancy measures. The linear subproblem over
the known-model polytope is ordinary planning (backward induction with the
linear weights as reward), and over the confidence-band polytope it is
extended value iteration, where every (h, s, a) also picks the most
favourable next-state distribution inside its band.

Because agent values are linear in the occupancy measure, the iteration is
tracked in value space as well: the duality gap and the line search only
touch N-vectors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fairness import MAX_MIN, FairnessObjective
from .mdp import uniform_policy
from .occupancy import agent_values_from_q, marginalize_z, q_from_policy, z_from_q

logger = logging.getLogger(__name__)

DIMINISHING = "diminishing"
LINE_SEARCH = "line_search"
STEP_RULES = (DIMINISHING, LINE_SEARCH)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleBandError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 2000
    tolerance: float = 1e-5
    step_rule: str = DIMINISHING
    # "fixed" uses the target soft-min temperature throughout; "annealed"
    # starts hot and cools to it, which helps max-min converge
    temperature: str = "annealed"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.temperature not in ("fixed", "annealed"):
            raise ValueError("temperature must be 'fixed' or 'annealed'")


@dataclass
class SolveResult:
    occupancy: np.ndarray  # q (H,S,A) or z (H,S,A,S)
    value: float  # exact (guarded) objective at the returned point
    agent_values: np.ndarray
    gap: float
    iterations: int
    converged: bool


@dataclass
class ConfidenceModel:
    """Empirical model plus confidence widths defining the optimistic set."""

    counts: np.ndarray  # (H, S, A)
    p_bar: np.ndarray  # (H-1, S, A, S)
    r_bar: np.ndarray  # (H, N, S, A)
    beta_p: np.ndarray  # (H-1, S, A, S)
    beta_r: np.ndarray  # (H, S, A)

    def optimistic_reward(self) -> np.ndarray:
        return np.minimum(self.r_bar + self.beta_r[:, None], 1.0)

    @classmethod
    def exact(cls, reward: np.ndarray, transition: np.ndarray) -> "ConfidenceModel":
        """Zero-width model centred on a known (r, p)."""
        H, N, S, A = reward.shape
        return cls(
            counts=np.zeros((H, S, A)),
            p_bar=np.array(transition, dtype=float),
            r_bar=np.array(reward, dtype=float),
            beta_p=np.zeros_like(transition, dtype=float),
            beta_r=np.zeros((H, S, A)),
        )


def target_temperature(objective: FairnessObjective, num_agents: int, tolerance: float) -> float:
    """Soft-min temperature whose bias tau*log(N) is at most tolerance/2."""
    if num_agents <= 1:
        return objective.softmin_temperature
    return tolerance / (2.0 * math.log(num_agents))


def linear_oracle_q(c: np.ndarray, transition: np.ndarray, initial_distribution: np.ndarray):
    """Occupancy of a deterministic policy maximizing sum c[h,s,a] q[h,s,a].

    Returns ``(q, objective)``; ties in the argmax go to the lowest action.
    """
    H, S, A = c.shape
    policy = np.zeros((H, S, A))
    v = np.zeros(S)
    for h in range(H - 1, -1, -1):
        qv = c[h] if h == H - 1 else c[h] + transition[h] @ v
        best = qv.argmax(axis=1)
        policy[h, np.arange(S), best] = 1.0
        v = qv[np.arange(S), best]
    q = q_from_policy(policy, transition, initial_distribution)
    return q, float(initial_distribution @ v)


def _band_bounds(p_bar: np.ndarray, beta: np.ndarray):
    lower = np.clip(p_bar - beta, 0.0, 1.0)
    upper = np.minimum(p_bar + beta, 1.0)
    return lower, upper


def _inner_max_rows(v_next: np.ndarray, p_bar: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Vectorized greedy band maximization for rows sharing one value vector.

    ``p_bar`` and ``beta`` have shape (..., S).
    """
    lower, upper = _band_bounds(p_bar, beta)
    remaining = 1.0 - lower.sum(axis=-1)
    if np.any(remaining < -1e-9):
        raise InfeasibleBandError("lower band bounds sum to more than one")
    remaining = np.maximum(remaining, 0.0)
    p = lower.copy()
    for s in np.argsort(-v_next, kind="stable"):
        add = np.minimum(upper[..., s] - lower[..., s], remaining)
        p[..., s] += add
        remaining = remaining - add
    if np.any(remaining > 1e-9):
        raise InfeasibleBandError("upper band bounds sum to less than one")
    return p


def inner_max_transition(v_next, p_bar_row, beta_row) -> np.ndarray:
    """Row p maximizing p @ v_next over the simplex with |p - p_bar| <= beta."""
    v = np.asarray(v_next, dtype=float)
    return _inner_max_rows(v, np.asarray(p_bar_row, dtype=float), np.asarray(beta_row, dtype=float))


def extended_linear_oracle(c: np.ndarray, model: ConfidenceModel, initial_distribution: np.ndarray):
    """Extended value iteration with immediate reward ``c``.

    Returns ``(z, objective)`` for the maximizing deterministic policy and
    in-band kernel.
    """
    H, S, A = c.shape
    policy = np.zeros((H, S, A))
    kernel = np.empty((max(H - 1, 0), S, A, S))
    v = np.zeros(S)
    idx = np.arange(S)
    for h in range(H - 1, -1, -1):
        if h == H - 1:
            qv = c[h]
        else:
            kernel[h] = _inner_max_rows(v, model.p_bar[h], model.beta_p[h])
            qv = c[h] + kernel[h] @ v
        best = qv.argmax(axis=1)
        policy[h, idx, best] = 1.0
        v = qv[idx, best]
    q = q_from_policy(policy, kernel, initial_distribution)
    return z_from_q(q, kernel), float(initial_distribution @ v)


def _line_search(objective: FairnessObjective, v: np.ndarray, d: np.ndarray, tol: float = 1e-10) -> float:
    """Golden-section maximization of the concave map gamma -> F(v + gamma d) on [0, 1]."""
    f = objective.smooth_value
    lo, hi = 0.0, 1.0
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(v + x1 * d), f(v + x2 * d)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(v + x2 * d)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(v + x1 * d)
    best = 0.5 * (lo + hi)
    # endpoints are the common maximizers for monotone segments
    cands = [(f(v + best * d), best), (f(v + d), 1.0), (f(v), 0.0)]
    return max(cands)[1]


def _frank_wolfe(objective, reward, x0, lmo, cfg: SolverConfig, values_of) -> SolveResult:
    N = reward.shape[1]
    x = x0
    v = values_of(x0)
    tau_target = target_temperature(objective, N, cfg.tolerance)
    smoothing = objective.kind == MAX_MIN and N > 1
    tau = tau_target
    if smoothing and cfg.temperature == "annealed":
        # hot start on the scale of the initial values; halved whenever the
        # gap at the current temperature falls below it
        tau = max(tau_target, 0.05 * float(np.abs(v).max() or 1.0))
    surrogate = objective.with_temperature(tau) if smoothing else objective
    gap = math.inf
    converged = False
    t = 0
    for t in range(cfg.max_iterations):
        g = surrogate.smooth_gradient(v)
        c = np.einsum("n,hnsa->hsa", g, reward)
        s, _ = lmo(c)
        vs = values_of(s)
        d = vs - v
        gap = float(g @ d)
        if tau > tau_target:
            if gap <= tau:
                tau = max(tau_target, 0.5 * tau)
                surrogate = objective.with_temperature(tau)
        elif gap <= cfg.tolerance:
            converged = True
            break
        if cfg.step_rule == LINE_SEARCH:
            gamma = _line_search(surrogate, v, d)
        else:
            gamma = 2.0 / (t + 2.0)
        if gamma > 0:
            x = x + gamma * (s - x)
            v = v + gamma * d
    if not converged:
        logger.debug("Frank-Wolfe stopped after %d iterations with gap %.3g", t + 1, gap)
    return SolveResult(
        occupancy=x,
        value=objective.guarded_value(v),
        agent_values=v,
        gap=gap,
        iterations=t + 1,
        converged=converged,
    )


def solve_fair_plan(
    reward: np.ndarray,
    transition: np.ndarray,
    initial_distribution: np.ndarray,
    objective: FairnessObjective,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Maximize the fairness objective over the occupancy polytope of a known model."""
    cfg = cfg or SolverConfig()
    H, N, S, A = reward.shape
    mu = np.asarray(initial_distribution, dtype=float)
    q0 = q_from_policy(uniform_policy(H, S, A), transition, mu)
    return _frank_wolfe(
        objective,
        reward,
        q0,
        lambda c: linear_oracle_q(c, transition, mu),
        cfg,
        lambda q: agent_values_from_q(q, reward),
    )


def solve_fair_extended(
    model: ConfidenceModel,
    objective: FairnessObjective,
    initial_distribution: np.ndarray,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Optimistic program: optimistic rewards, kernels free within the confidence bands."""
    cfg = cfg or SolverConfig()
    reward = model.optimistic_reward()
    H, N, S, A = reward.shape
    mu = np.asarray(initial_distribution, dtype=float)
    z0 = z_from_q(q_from_policy(uniform_policy(H, S, A), model.p_bar, mu), model.p_bar)
    return _frank_wolfe(
        objective,
        reward,
        z0,
        lambda c: extended_linear_oracle(c, model, mu),
        cfg,
        lambda z: agent_values_from_q(marginalize_z(z), reward),
    )
