import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semidid import Dataset

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dataset(rng, n=200, p=2, selection=0.5, cluster=False):
    """Rows with covariate-dependent cell shares; every cell gets a few rows."""
    X = rng.standard_normal((n, p))
    score = selection * X.sum(axis=1) if p else np.zeros(n)
    d = (score + rng.standard_normal(n) > 0).astype(int)
    t = rng.integers(0, 2, n)
    d[:4] = [1, 1, 0, 0]
    t[:4] = [1, 0, 1, 0]
    y = 0.5 * d + 0.3 * t + d * t + (X.sum(axis=1) * 0.3 if p else 0) + rng.standard_normal(n)
    cl = np.arange(n) if cluster else None
    return Dataset.from_arrays(y, d, t, X, cluster_id=cl)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
