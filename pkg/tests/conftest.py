import numpy as np
import pytest

from tensionlab.beltrami import construct_entire
from tensionlab.field import ComplexField, GridSpec
from tensionlab.metric import builtin_metric

# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE = {}

STRIP = (0.5, 2.5, 0.0, 1.0)  # log-cosh fixture domain
SQUARE = (-1.0, 1.0, -1.0, 1.0)


def strip_grid(h):
    return GridSpec.from_bounds(*STRIP, h)


def square_grid(h):
    return GridSpec.from_bounds(*SQUARE, h)


def log_cosh(z):
    return np.log(np.cosh(z.real)) + 1j * z.imag


def peaked_control(z):
    # |mu| has a strict interior peak at 0; not harmonic for any flat metric
    return z + 0.3 * np.exp(-np.abs(z) ** 2) * np.conj(z)


@pytest.fixture(scope="session")
def exp_x():
    return builtin_metric("exp_x")


@pytest.fixture(scope="session")
def euclid():
    return builtin_metric("euclid")


@pytest.fixture(scope="session")
def tanh_fields():
    """The log-cosh fixture sampled at h = 1/32, 1/64, 1/128."""
    return {n: ComplexField.sample(strip_grid(1 / n), log_cosh) for n in (32, 64, 128)}


@pytest.fixture(scope="session")
def member_032():
    return construct_entire(0.3, builtin_metric("exp_x"), square_grid(1 / 32))


@pytest.fixture(scope="session")
def member_064():
    return construct_entire(0.3, builtin_metric("exp_x"), square_grid(1 / 64))


@pytest.fixture(scope="session")
def member_128():
    return construct_entire(0.3, builtin_metric("exp_x"), square_grid(1 / 128))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
