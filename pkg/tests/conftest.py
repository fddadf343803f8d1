import numpy as np
import pytest

from artifact.bops import build_system
from artifact.semiclassical import SemiClassicalData
from artifact.weight import WeightFactor, WeightSpec, fourier_coefficients

QUAD_MAX = 2**16


def factor_spec(*factors) -> WeightSpec:
    return WeightSpec(tuple(WeightFactor(*f) for f in factors))


def system_of(spec: WeightSpec, n_max: int):
    return build_system(fourier_coefficients(spec, tol=1e-14, n_max=QUAD_MAX), n_max)


LEBESGUE = WeightSpec()
# (1 - 0.5/z)^0.3 (z - 2)^0.4, singular points 0, 0.5, 2
TEST_WEIGHT = factor_spec(("conjugated", 0.5, 0.3), ("outer", 2, 0.4))
LINEAR = factor_spec(("outer", 2, 1))
INVERSE_LINEAR = factor_spec(("outer", 2, -1))


@pytest.fixture(scope="session")
def lebesgue_system():
    return system_of(LEBESGUE, 16)


@pytest.fixture(scope="session")
def test_system():
    return system_of(TEST_WEIGHT, 14)


@pytest.fixture(scope="session")
def test_data():
    return SemiClassicalData.from_spec(TEST_WEIGHT)


@pytest.fixture(scope="session")
def inverse_linear_system():
    return system_of(INVERSE_LINEAR, 8)


@pytest.fixture(scope="session")
def linear_system():
    return system_of(LINEAR, 8)


def circle_moment(spec: WeightSpec, f, nodes: int = 4096) -> complex:
    """Trapezoid average of f(zeta) w(zeta) over the unit circle, evaluated directly."""
    from artifact.weight import evaluate_weight

    z = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    return complex(np.mean(f(z) * evaluate_weight(spec, z)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
