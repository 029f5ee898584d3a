import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fiberbunch import examples
from fiberbunch.shift_space import ShiftSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SPECS = {
    "full2": ShiftSpec.full(2),
    "golden": ShiftSpec.golden_mean(),
    "full3": ShiftSpec.full(3, 0.4),
    "three": ShiftSpec(((1, 1, 0), (0, 1, 1), (1, 0, 1)), 0.5),
}


def sequence(x, lo, hi):
    """Brute-force materialization used as an oracle for the point encoding."""
    return [x[i] for i in range(lo, hi + 1)]


@pytest.fixture
def full2():
    return SPECS["full2"]


@pytest.fixture
def golden():
    return SPECS["golden"]


@pytest.fixture
def e2():
    return examples.e2()


@pytest.fixture
def e3():
    return examples.e3()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
