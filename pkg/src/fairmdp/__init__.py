"""Fair reinforcement learning for multi-agent finite-horizon tabular MDPs."""

from .fairness import FairnessDomainError, FairnessObjective, alpha_fair, max_min, proportional
from .mdp import RandomMdpConfig, TabularMdp, exact_agent_values, generate_random_mdp, sample_episodes
from .offline import Dataset, build_pessimistic_model, solve_offline
from .online import run_online
from .oracle import brute_force_oracle
from .pgrad import PgConfig, estimate_gradient, run_policy_gradient
from .solver import SolverConfig, solve_fair_extended, solve_fair_plan

__all__ = [
    "Dataset",
    "FairnessDomainError",
    "FairnessObjective",
    "PgConfig",
    "RandomMdpConfig",
    "SolverConfig",
    "TabularMdp",
    "alpha_fair",
    "brute_force_oracle",
    "build_pessimistic_model",
    "estimate_gradient",
    "exact_agent_values",
    "generate_random_mdp",
    "max_min",
    "proportional",
    "run_online",
    "run_policy_gradient",
    "sample_episodes",
    "solve_fair_extended",
    "solve_fair_plan",
    "solve_offline",
]
