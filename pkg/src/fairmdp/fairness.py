"""Fairness objectives over per-agent value vectors.

Three families are supported: max-min, proportional (sum of logs) and
alpha-fairness (sum of v**(1-alpha) / (1-alpha)). ``alpha == 1`` is the
proportional objective.

Besides the exact objective every family has a *smooth* surrogate used by
the continuous solver:

* max-min is replaced by the log-sum-exp soft-min at temperature ``tau``;
* proportional / alpha are extended below the floor ``epsilon`` by their
  tangent line at ``epsilon``. The extension is concave, increasing and
  agrees with the exact objective on ``[epsilon, inf)``, so it only matters
  for pessimistic models whose values can drop under the floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_MIN = "max_min"
PROPORTIONAL = "proportional"
ALPHA = "alpha"


class FairnessDomainError(ValueError):
    """Raised when a value vector is outside the objective's domain."""


@dataclass(frozen=True)
class FairnessObjective:
    kind: str
    alpha: float = 1.0
    epsilon: float = 0.1
    softmin_temperature: float = 1e-3

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in (MAX_MIN, PROPORTIONAL, ALPHA):
            raise ValueError(f"unknown fairness kind {self.kind!r}")
        if kind == ALPHA:
            if not self.alpha > 0:
                raise ValueError("alpha must be positive")
            if self.alpha == 1.0:
                kind = PROPORTIONAL
        if kind == PROPORTIONAL:
            object.__setattr__(self, "alpha", 1.0)
        object.__setattr__(self, "kind", kind)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.softmin_temperature <= 0:
            raise ValueError("soft-min temperature must be positive")

    @classmethod
    def parse(cls, text: str, epsilon: float = 0.1, softmin_temperature: float = 1e-3) -> "FairnessObjective":
        """Parse ``"max-min"``, ``"proportional"`` or ``"alpha:<float>"``."""
        t = text.strip().lower()
        if t in ("max-min", "max_min", "maxmin"):
            return cls(MAX_MIN, epsilon=epsilon, softmin_temperature=softmin_temperature)
        if t == "proportional":
            return cls(PROPORTIONAL, epsilon=epsilon, softmin_temperature=softmin_temperature)
        if t.startswith("alpha:"):
            try:
                alpha = float(t.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad alpha in fairness string {text!r}") from None
            return cls(ALPHA, alpha=alpha, epsilon=epsilon, softmin_temperature=softmin_temperature)
        raise ValueError(f"unknown fairness string {text!r}; expected max-min, proportional or alpha:<float>")

    @property
    def label(self) -> str:
        if self.kind == MAX_MIN:
            return "max-min"
        if self.kind == PROPORTIONAL:
            return "proportional"
        return f"alpha:{self.alpha:g}"

    def with_temperature(self, tau: float) -> "FairnessObjective":
        return FairnessObjective(self.kind, self.alpha, self.epsilon, tau)

    def _check_domain(self, v: np.ndarray) -> None:
        floor = 0.0 if self.kind == MAX_MIN else self.epsilon
        bad = np.flatnonzero(v < floor)
        if bad.size:
            i = int(bad[0])
            raise FairnessDomainError(
                f"agent {i} has value {v[i]:.6g} below the floor {floor:g} of the {self.label} objective"
            )

    def evaluate(self, values) -> float:
        v = np.asarray(values, dtype=float)
        self._check_domain(v)
        return self._exact(v)

    def _exact(self, v: np.ndarray) -> float:
        if self.kind == MAX_MIN:
            return float(v.min())
        if self.kind == PROPORTIONAL:
            return float(np.log(v).sum())
        a = self.alpha
        return float((v ** (1.0 - a)).sum() / (1.0 - a))

    def gradient(self, values, mode: str = "smooth") -> np.ndarray:
        """Gradient of the objective w.r.t. the value vector.

        For max-min, ``mode="smooth"`` returns soft-min weights (they sum to
        one) and ``mode="exact"`` the indicator of the first argmin.
        """
        v = np.asarray(values, dtype=float)
        self._check_domain(v)
        if self.kind == MAX_MIN:
            if mode == "exact":
                g = np.zeros_like(v)
                g[int(np.argmin(v))] = 1.0
                return g
            if mode != "smooth":
                raise ValueError(f"unknown gradient mode {mode!r}")
            return self._softmin_weights(v)
        return v ** (-self.alpha)

    def lipschitz_constant(self, num_agents: int) -> float:
        if self.kind == MAX_MIN:
            return 1.0 / num_agents
        return self.epsilon ** (-self.alpha)

    def softmin(self, values) -> float:
        v = np.asarray(values, dtype=float)
        tau = self.softmin_temperature
        m = v.min()
        return float(m - tau * math.log(np.exp(-(v - m) / tau).sum()))

    def _softmin_weights(self, v: np.ndarray) -> np.ndarray:
        w = np.exp(-(v - v.min()) / self.softmin_temperature)
        return w / w.sum()

    # -- surrogate used by the solvers; defined for every real vector --

    def smooth_value(self, values) -> float:
        v = np.asarray(values, dtype=float)
        if self.kind == MAX_MIN:
            return self.softmin(v)
        eps = self.epsilon
        low = v < eps
        if not low.any():
            return self._exact(v)
        clipped = np.where(low, eps, v)
        slope = eps ** (-self.alpha)
        return self._exact(clipped) + float((slope * (v - clipped)).sum())

    def smooth_gradient(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if self.kind == MAX_MIN:
            return self._softmin_weights(v)
        return np.maximum(v, self.epsilon) ** (-self.alpha)

    def guarded_value(self, values) -> float:
        """Exact objective for max-min, floor-guarded objective otherwise."""
        v = np.asarray(values, dtype=float)
        if self.kind == MAX_MIN:
            return float(v.min())
        return self.smooth_value(v)

    def evaluate_many(self, values: np.ndarray) -> np.ndarray:
        """Exact objective for a stack of value vectors, shape (..., N); no domain check."""
        if self.kind == MAX_MIN:
            return values.min(axis=-1)
        if self.kind == PROPORTIONAL:
            return np.log(values).sum(axis=-1)
        a = self.alpha
        return (values ** (1.0 - a)).sum(axis=-1) / (1.0 - a)


def max_min() -> FairnessObjective:
    return FairnessObjective(MAX_MIN)


def proportional(epsilon: float = 0.1) -> FairnessObjective:
    return FairnessObjective(PROPORTIONAL, epsilon=epsilon)


def alpha_fair(alpha: float, epsilon: float = 0.1) -> FairnessObjective:
    return FairnessObjective(ALPHA, alpha=alpha, epsilon=epsilon)
