import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_hyperbolic(rng: np.random.Generator, n: int = 6, min_real: float = 0.5, max_real: float = 5.0):
    """``V D V^-1`` with real diagonal or rotation blocks, ``|Re lambda|`` in ``[min_real, max_real]``.

    ``V`` is a product of two random orthogonal matrices around singular
    values in ``[0.5, 2]`` so that the conditioning stays moderate.
    """
    D = np.zeros((n, n))
    i = 0
    while i < n:
        re = rng.uniform(min_real, max_real) * rng.choice([-1.0, 1.0])
        if i + 1 < n and rng.random() < 0.4:
            im = rng.uniform(0.2, 3.0)
            D[i : i + 2, i : i + 2] = [[re, im], [-im, re]]
            i += 2
        else:
            D[i, i] = re
            i += 1
    Q1, _ = np.linalg.qr(rng.normal(size=(n, n)))
    Q2, _ = np.linalg.qr(rng.normal(size=(n, n)))
    V = Q1 @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ Q2
    return V @ D @ np.linalg.inv(V)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
