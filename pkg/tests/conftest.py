import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dropsindy.data_model import Trajectory
from dropsindy.simulate import ConstantAcceleration, LinearDrag, simulate_drop

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def free_fall() -> Trajectory:
    return simulate_drop(ConstantAcceleration()).trajectory


@pytest.fixture(scope="session")
def linear_drop() -> Trajectory:
    return simulate_drop(LinearDrag()).trajectory


def quadratic_trajectory(n=50, dt=1 / 15, x0=35.0) -> Trajectory:
    t = np.arange(n) * dt
    return Trajectory(t, x0 - 4.9 * t**2, "q", 1)


# One line per acceptance criterion, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
