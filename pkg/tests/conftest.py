import numpy as np
import pytest

from tlportfolio.estimators import GaussianMoments
from tlportfolio.simulate import toeplitz_cov

EX1_MU = np.array([1.5, 1.9, 2.8, 1.7, -0.9])


@pytest.fixture
def ex1_moments():
    return GaussianMoments(EX1_MU.copy(), toeplitz_cov(5, 0.5))


def random_pd(rng, d, mean_scale=1.0):
    """Random PD covariance and mean with at least one positive entry."""
    a = rng.normal(size=(d, d))
    cov = a @ a.T + 0.1 * np.eye(d)
    mu = rng.normal(scale=mean_scale, size=d)
    return GaussianMoments(mu, cov)


# acceptance verdicts, printed once at the end of the session
VERDICTS: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    VERDICTS.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
