import math

import numpy as np
import pytest

from genborn.states import AsymmetricStep, Gaussian, SymmetricUniform, Tabulated

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_tabulated(rng, n=None):
    n = n or int(rng.integers(5, 60))
    x = np.sort(rng.uniform(-3, 3, n))
    x = np.unique(x)
    amps = rng.normal(size=x.size) + 1j * rng.normal(size=x.size)
    return Tabulated(x, amps)


def random_state(rng):
    kind = rng.integers(4)
    if kind == 0:
        return SymmetricUniform(rng.uniform(0.3, 3))
    if kind == 1:
        return AsymmetricStep(rng.uniform(0.3, 3), rng.uniform(0.2, 5))
    if kind == 2:
        return Gaussian(10 ** rng.uniform(-3, 2), rng.uniform(-5, 5))
    return random_tabulated(rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def lopsided_tabulated():
    """Skewed two-bump state on a 201-point grid, used where a fixed tabulated case is needed."""
    x = np.linspace(-2.0, 3.0, 201)
    amp = np.exp(-((x + 0.8) ** 2) / 0.3) + 0.5 * np.exp(-((x - 1.2) ** 2) / 0.8) * np.exp(2j * x)
    return Tabulated(x, amp)


def nearly(a, b, tol):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
