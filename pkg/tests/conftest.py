import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fourthnls import CutoffProfile, DampingProfile, assemble_control_operator, make_grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines appended by test_acceptance, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def localized():
    return DampingProfile(((0.0, np.pi),), level=1.0, width=0.3)


@pytest.fixture(scope="session")
def R32(localized):
    return assemble_control_operator(localized, CutoffProfile(1.0), make_grid(32), 1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
