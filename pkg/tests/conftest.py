import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from raca.channel import generate_channels
from raca.sysmodel import SystemConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def spd(rng, n, floor=0.1):
    g = crandn(rng, n, n)
    return g @ g.conj().T + floor * np.eye(n)


@pytest.fixture
def config():
    return SystemConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def channels(config):
    return generate_channels(config, 7)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
