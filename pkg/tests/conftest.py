import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stabledom.kernels import isotropic, stable_like
from stabledom.lattice import Lattice
from stabledom.truncation import make_context

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cauchy():
    return isotropic(1.0, 1)


@pytest.fixture(scope="session")
def modulated():
    return stable_like(0.5, 1, 0.5, 1.0)


@pytest.fixture(scope="session")
def cauchy_ctx(cauchy):
    return make_context(cauchy, 0.5)


@pytest.fixture(scope="session")
def small_lattice():
    return Lattice(10.0, 161, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    def _record(criterion: int, title: str, passed: bool, detail: str) -> None:
        line = f"criterion {criterion:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
