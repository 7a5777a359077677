"""Finite-horizon multi-agent tabular MDPs.

Array conventions used across the package (steps are 0-based):

* ``transition[h, s, a, s']`` for h in 0..H-2 (no kernel after the last step)
* ``reward[h, i, s, a]`` true mean reward of agent ``i``
* ``policy[h, s, a]`` action distribution per (step, state)
* ``initial_distribution[s]``
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .seeding import MDP_STREAM, make_rng

ROW_TOL = 1e-9


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def check_policy(policy: np.ndarray, atol: float = ROW_TOL) -> None:
    if np.any(policy < -atol):
        raise ValueError("policy has negative probabilities")
    if not np.allclose(policy.sum(axis=-1), 1.0, atol=atol, rtol=0.0):
        raise ValueError("policy rows must sum to 1")


def uniform_policy(horizon: int, num_states: int, num_actions: int) -> np.ndarray:
    return np.full((horizon, num_states, num_actions), 1.0 / num_actions)


@dataclass(frozen=True)
class TabularMdp:
    """Immutable finite-horizon MDP with one reward table per agent."""

    transition: np.ndarray
    reward: np.ndarray
    initial_distribution: np.ndarray
    noise_half_width: float = 0.0
    epsilon: float = 0.1
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "initial_distribution", _frozen(self.initial_distribution))
        H, N, S, A = self.reward.shape
        if self.transition.shape != (max(H - 1, 0), S, A, S):
            raise ValueError(
                f"transition shape {self.transition.shape} does not match "
                f"(H-1, S, A, S) = {(H - 1, S, A, S)}"
            )
        if self.initial_distribution.shape != (S,):
            raise ValueError("initial distribution must have one entry per state")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.noise_half_width < 0:
            raise ValueError("noise half-width must be non-negative")
        if np.any(self.transition < 0) or not np.allclose(
            self.transition.sum(axis=-1), 1.0, atol=ROW_TOL, rtol=0.0
        ):
            raise ValueError("every transition row must be a distribution")
        if np.any(self.initial_distribution < 0) or abs(self.initial_distribution.sum() - 1) > ROW_TOL:
            raise ValueError("initial distribution must sum to 1")
        lo = self.epsilon / H
        if np.any(self.reward < lo - 1e-12) or np.any(self.reward > 1 + 1e-12):
            raise ValueError(f"rewards must lie in [epsilon/H, 1] = [{lo:g}, 1]")

    @property
    def horizon(self) -> int:
        return self.reward.shape[0]

    @property
    def num_agents(self) -> int:
        return self.reward.shape[1]

    @property
    def num_states(self) -> int:
        return self.reward.shape[2]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[3]

    @property
    def reward_floor(self) -> float:
        return self.epsilon / self.horizon

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_agents": self.num_agents,
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "horizon": self.horizon,
            "transition": self.transition.ravel().tolist(),
            "reward": self.reward.ravel().tolist(),
            "initial_distribution": self.initial_distribution.tolist(),
            "noise_half_width": self.noise_half_width,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TabularMdp":
        N, S, A, H = d["num_agents"], d["num_states"], d["num_actions"], d["horizon"]
        return cls(
            transition=np.asarray(d["transition"], dtype=float).reshape(max(H - 1, 0), S, A, S),
            reward=np.asarray(d["reward"], dtype=float).reshape(H, N, S, A),
            initial_distribution=np.asarray(d["initial_distribution"], dtype=float),
            noise_half_width=float(d.get("noise_half_width", 0.0)),
            epsilon=float(d.get("epsilon", 0.1)),
            seed=d.get("seed"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "TabularMdp":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RandomMdpConfig:
    """Parameters of the random-instance generator (defaults: the S=A=N=2, H=3 setup)."""

    num_agents: int = 2
    num_states: int = 2
    num_actions: int = 2
    horizon: int = 3
    reward_low: float = 0.15
    reward_high: float = 0.95
    noise_half_width: float = 0.05
    epsilon: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_agents", "num_states", "num_actions", "horizon"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.reward_low > self.reward_high:
            raise ValueError("reward_low must not exceed reward_high")
        floor = self.epsilon / self.horizon
        if self.reward_low - self.noise_half_width < floor - 1e-12:
            raise ValueError(
                f"reward_low - noise_half_width = {self.reward_low - self.noise_half_width:g} "
                f"is below epsilon/H = {floor:g}"
            )
        if self.reward_high + self.noise_half_width > 1 + 1e-12:
            raise ValueError("reward_high + noise_half_width must not exceed 1")


def generate_random_mdp(config: RandomMdpConfig) -> TabularMdp:
    config.validate()
    rng = make_rng(config.seed, MDP_STREAM)
    H, N, S, A = config.horizon, config.num_agents, config.num_states, config.num_actions
    raw = rng.uniform(0.0, 1.0, size=(H - 1, S, A, S))
    # a row of exact zeros has probability zero, but keep the division safe
    raw[raw.sum(axis=-1) == 0] = 1.0
    transition = raw / raw.sum(axis=-1, keepdims=True)
    reward = rng.uniform(config.reward_low, config.reward_high, size=(H, N, S, A))
    mu = np.zeros(S)
    mu[0] = 1.0
    return TabularMdp(
        transition=transition,
        reward=reward,
        initial_distribution=mu,
        noise_half_width=config.noise_half_width,
        epsilon=config.epsilon,
        seed=config.seed,
    )


def observe_reward(mdp: TabularMdp, h: int, i: int, s: int, a: int, rng: np.random.Generator) -> float:
    """One noisy reward observation: clipped uniform noise around the true mean."""
    mean = mdp.reward[h, i, s, a]
    w = mdp.noise_half_width
    if w == 0:
        return float(mean)
    return float(np.clip(mean + rng.uniform(-w, w), mdp.reward_floor, 1.0))


@dataclass
class Trajectory:
    """One episode: visited states, chosen actions and per-agent observed rewards."""

    states: np.ndarray  # (H,)
    actions: np.ndarray  # (H,)
    rewards: np.ndarray  # (H, N)

    @property
    def horizon(self) -> int:
        return len(self.states)


@dataclass
class EpisodeBatch:
    """Many episodes stored as stacked arrays; row ``k`` is one trajectory."""

    states: np.ndarray  # (K, H) int
    actions: np.ndarray  # (K, H) int
    rewards: np.ndarray  # (K, H, N)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, k: int) -> Trajectory:
        return Trajectory(self.states[k], self.actions[k], self.rewards[k])

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def returns(self) -> np.ndarray:
        """Per-episode, per-agent returns, shape (K, N)."""
        return self.rewards.sum(axis=1)


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one index per row of a (K, n) probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None]
    idx = (u >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_episodes(
    mdp: TabularMdp, policy: np.ndarray, rng: np.random.Generator, num_episodes: int
) -> EpisodeBatch:
    """Roll out ``num_episodes`` independent episodes of ``policy``."""
    H, N = mdp.horizon, mdp.num_agents
    K = int(num_episodes)
    states = np.empty((K, H), dtype=np.int64)
    actions = np.empty((K, H), dtype=np.int64)
    rewards = np.empty((K, H, N))
    mu = np.broadcast_to(mdp.initial_distribution, (K, mdp.num_states))
    s = _sample_rows(mu, rng)
    w = mdp.noise_half_width
    for h in range(H):
        a = _sample_rows(policy[h, s], rng)
        states[:, h] = s
        actions[:, h] = a
        mean = mdp.reward[h][:, s, a].T  # (K, N)
        if w > 0:
            rewards[:, h] = np.clip(mean + rng.uniform(-w, w, size=mean.shape), mdp.reward_floor, 1.0)
        else:
            rewards[:, h] = mean
        if h < H - 1:
            s = _sample_rows(mdp.transition[h, s, a], rng)
    return EpisodeBatch(states, actions, rewards)


def sample_episode(mdp: TabularMdp, policy: np.ndarray, rng: np.random.Generator) -> Trajectory:
    return sample_episodes(mdp, policy, rng, 1)[0]


def policy_values(
    reward: np.ndarray, transition: np.ndarray, policy: np.ndarray, initial_distribution: np.ndarray
) -> np.ndarray:
    """Per-agent expected return by backward induction, averaged over the initial distribution.

    Works for any reward table (pessimistic, optimistic, negative) and any
    kernel; nothing here assumes the rewards satisfy the modelling range.
    """
    H = reward.shape[0]
    v = np.zeros((reward.shape[1], reward.shape[2]))  # (N, S)
    for h in range(H - 1, -1, -1):
        q = reward[h]  # (N, S, A)
        if h < H - 1:
            q = q + np.einsum("sat,nt->nsa", transition[h], v)
        v = np.einsum("nsa,sa->ns", q, policy[h])
    return v @ initial_distribution


def exact_agent_values(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    return policy_values(mdp.reward, mdp.transition, policy, mdp.initial_distribution)
