import numpy as np
import pytest

from creator_econ.economy import ResponseMode, make_instance

ACCEPTANCE_LINES = []


def record_acceptance(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number} {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def random_smooth_instance(rng, d=2, K=None, M=None, S=None, bernoulli=True):
    K = K or int(rng.integers(1, 4))
    M = M or int(rng.integers(1, 4))
    S = S or int(rng.integers(1, K + 1))

    def ball(n):
        x = rng.normal(size=(n, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return x * rng.random((n, 1)) ** (1.0 / d)

    users = ball(M)
    a, b = ball(K), ball(K)
    creators = [dict(anchor_a=a[k], anchor_b=b[k]) for k in range(K)]
    return make_instance(users, creators, S=S, bernoulli=bernoulli)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def one_by_one():
    """K = M = S = 1, quadratic creator at the origin, user (1, 0)."""
    return make_instance([[1.0, 0.0]], [dict(mode=ResponseMode.QUADRATIC, cost_scale=1.0)], S=1)
