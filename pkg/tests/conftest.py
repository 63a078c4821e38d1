import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_spd(rng, p, extra=None):
    b = rng.standard_normal((p, p))
    return b.T @ b + (p if extra is None else extra) * np.eye(p)


@pytest.fixture(autouse=True)
def _quiet_solver_warnings():
    from ggmdl.glasso import NotConverged

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        yield


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
