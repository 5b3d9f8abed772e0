import numpy as np
import pytest

from fheston import GridSpec, ModelParams, ShiftedPowerSigma


@pytest.fixture
def base_params():
    return ModelParams(mu=0.5, kappa=1.0, theta=1.0, nu=0.14, H=0.7, rho=0.0, S0=1.0, Y0=1.0, T=1.0)


@pytest.fixture
def base_sigma():
    return ShiftedPowerSigma(0.5, 0.01, 0.9)


@pytest.fixture
def grid100():
    return GridSpec(100, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: PASS/FAIL lines from the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
