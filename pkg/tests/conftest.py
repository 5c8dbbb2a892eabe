import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from temlink.if_tem import TemParams
from temlink.waveform import pam_constellation, rrc_pulse

settings.register_profile("temlink", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("temlink")


def rrc_closed_form(x, beta):
    """Textbook root-raised-cosine impulse response, unit symbol period, g(0) = 1 - b + 4b/pi."""
    x = np.asarray(x, dtype=float)
    num = np.sin(np.pi * x * (1 - beta)) + 4 * beta * x * np.cos(np.pi * x * (1 + beta))
    den = np.pi * x * (1 - (4 * beta * x) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x == 0, 1 - beta + 4 * beta / np.pi, num / den)


@pytest.fixture(scope="session")
def pam4():
    return pam_constellation(4)


@pytest.fixture(scope="session")
def pam2():
    return pam_constellation(2)


@pytest.fixture(scope="session")
def rrc():
    return rrc_pulse(0.5, memory=4)


@pytest.fixture(scope="session")
def tem():
    return TemParams(kappa=1.0, delta=1.0, bias=2.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance report -------------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
