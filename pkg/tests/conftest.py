import numpy as np
import pytest
from hypothesis import settings

from fairmdp.mdp import RandomMdpConfig, TabularMdp, generate_random_mdp

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

M1_REWARD = np.array([[[[1.0, 0.1]], [[0.1, 1.0]]]])  # (H=1, N=2, S=1, A=2)


def make_m1(noise: float = 0.0) -> TabularMdp:
    """One state, two actions, one step, two agents with mirrored rewards."""
    return TabularMdp(np.zeros((0, 1, 2, 1)), M1_REWARD, np.array([1.0]), noise_half_width=noise, epsilon=0.1)


def m1_policy(p_a1: float) -> np.ndarray:
    return np.array([[[p_a1, 1.0 - p_a1]]])


def random_policy(rng, H, S, A):
    p = rng.random((H, S, A)) + 1e-3
    return p / p.sum(axis=-1, keepdims=True)


def random_instance(seed, N=2, S=2, A=2, H=3, noise=0.05):
    return generate_random_mdp(
        RandomMdpConfig(num_agents=N, num_states=S, num_actions=A, horizon=H, noise_half_width=noise, seed=seed)
    )


@pytest.fixture
def m1():
    return make_m1()


@pytest.fixture
def default_mdp():
    return generate_random_mdp(RandomMdpConfig(seed=0))


# one line per acceptance criterion, printed after the test session
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
