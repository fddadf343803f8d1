"""Spectral and deformation structure of the two-point test weight."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import semiclassical as sc
from artifact.bops import y_matrix
from artifact.errors import DomainError, InapplicableError
from artifact.weight import log_derivative

from conftest import LEBESGUE, TEST_WEIGHT, factor_spec, system_of

POINTS = [0.3 + 0.4j, -0.5 + 0.25j, 0.2 - 0.6j, 1.4 + 1.1j, -2.1 - 0.5j, 0.6 + 2.3j]
VELOCITIES = [1.0, 0.5j]
DELTA = 1e-5


def _align(a, b):
    return 1 if abs(a - b) <= abs(a + b) else -1


@pytest.fixture(scope="module")
def moved():
    data = sc.SemiClassicalData.from_spec(TEST_WEIGHT)
    return (
        sc.perturb(TEST_WEIGHT, data, VELOCITIES, DELTA, 8),
        sc.perturb(TEST_WEIGHT, data, VELOCITIES, -DELTA, 8),
    )


class TestData:
    def test_singularities(self, test_data):
        assert np.allclose(test_data.zs, [0, 0.5, 2])
        assert np.allclose(test_data.rhos, [-0.3, 0.3, 0.4])
        assert test_data.M == 2
        assert test_data.warnings == ()

    def test_log_derivative_matches_weight(self, test_data):
        for z in POINTS:
            assert test_data.log_derivative(z) == pytest.approx(log_derivative(TEST_WEIGHT, z))

    def test_lebesgue_not_semiclassical(self):
        data = sc.SemiClassicalData.from_spec(LEBESGUE)
        assert data.M == 0
        with pytest.raises(InapplicableError):
            data.require_generic()

    def test_dict_roundtrip(self, test_data):
        assert sc.SemiClassicalData.from_dict(test_data.to_dict()) == test_data

    def test_integer_exponent_warned(self):
        data = sc.SemiClassicalData.from_spec(factor_spec(("outer", 2, 1), ("outer", 3, 0.5)))
        assert any("nonnegative integer" in w for w in data.warnings)


class TestResidues:
    @pytest.mark.parametrize("n", range(7))
    def test_origin_structure(self, test_system, test_data, n):
        A0 = sc.residue_set(test_system, test_data, n).A[0]
        assert np.all(A0[1] == 0)
        assert A0[0, 0] == test_data.rhos[0] * -1 + n

    @pytest.mark.parametrize("n", range(7))
    def test_infinity_from_sum(self, test_system, test_data, n):
        rs = sc.residue_set(test_system, test_data, n, tol=np.inf)
        s = test_data.rhos.sum()
        closed = np.array([[-n, 0], [-(n + s) * test_system.rbar[n], s]])
        assert np.max(np.abs(-sum(rs.A) - closed)) < 1e-9

    @pytest.mark.parametrize("n", range(7))
    def test_sum_identities(self, test_system, test_data, n):
        assert max(abs(v) for v in sc.sum_identities(test_system, test_data, n).values()) < 1e-9

    def test_pole_rejected(self, test_system, test_data):
        rs = sc.residue_set(test_system, test_data, 2)
        with pytest.raises(DomainError):
            sc.spectral_matrix(rs, test_data, 0.5)


class TestSpectral:
    @pytest.mark.parametrize("n", [0, 3, 6])
    def test_trace(self, test_system, test_data, n):
        rs = sc.residue_set(test_system, test_data, n)
        for z in POINTS * 2:
            z = z * 1.05
            lw = log_derivative(TEST_WEIGHT, z)
            assert abs(np.trace(sc.spectral_matrix(rs, test_data, z)) - n / z + lw) < 1e-9

    @pytest.mark.parametrize("n", [1, 4])
    def test_ode_by_central_difference(self, test_system, test_data, n):
        rs = sc.residue_set(test_system, test_data, n)
        h = 1e-6
        for z in POINTS:
            Y = y_matrix(test_system, TEST_WEIGHT, n, z).entries
            dY = (y_matrix(test_system, TEST_WEIGHT, n, z + h).entries - y_matrix(test_system, TEST_WEIGHT, n, z - h).entries) / (2 * h)
            AY = sc.spectral_matrix(rs, test_data, z) @ Y
            assert np.max(np.abs(dY - AY)) < 1e-7 * max(1, np.max(np.abs(AY)))

    @pytest.mark.parametrize("n", [0, 2, 5])
    def test_recurrence_compatibility(self, test_system, test_data, n):
        for z in POINTS:
            assert sc.spectral_compat_residual(test_system, test_data, n, z) < 1e-8


class TestMonodromy:
    @pytest.mark.parametrize("n", [0, 3, 6])
    def test_exponent_sum(self, test_data, n):
        th = sc.exponents(test_data, n)
        assert sum(th.values()) - 2 * n == 0

    @pytest.mark.parametrize("n", [0, 3, 6])
    def test_diagonalisation(self, test_system, test_data, n):
        rs = sc.residue_set(test_system, test_data, n)
        for block in sc.formal_monodromy(rs, test_system, test_data):
            assert block.residual < 1e-9 * max(1, np.max(np.abs(block.G)))

    @pytest.mark.parametrize("n", range(7))
    def test_eigenvalues(self, test_system, test_data, n):
        A1 = sc.residue_set(test_system, test_data, n).A[1]
        ev = np.sort_complex(np.linalg.eigvals(A1))
        assert np.allclose(ev, np.sort_complex(np.array([0, -test_data.rhos[1]])), atol=1e-9)


class TestBilinear:
    @pytest.mark.parametrize("n", range(7))
    @pytest.mark.parametrize("j", [1, 2])
    def test_redundant_relations(self, test_system, test_data, n, j):
        B = sc.bilinear_products(test_system, test_data, n, j)
        p, ps, x, xs = sc.point_values(test_system, n, test_data.zs[j])
        scale = max(1, abs(p * x), abs(ps * xs))
        assert max(abs(v) for v in B.residuals.values()) < 1e-9 * scale

    def test_lebesgue_inapplicable(self, lebesgue_system):
        data = sc.SemiClassicalData.from_spec(LEBESGUE)
        with pytest.raises(InapplicableError):
            sc.bilinear_products(lebesgue_system, data, 1, 1)


class TestDeformation:
    def test_zero_velocities(self, test_system, test_data):
        rs = sc.residue_set(test_system, test_data, 3)
        assert np.max(np.abs(sc.deformation_matrix(rs, test_system, test_data, [0, 0], 0.7 + 0.2j))) == 0

    @pytest.mark.parametrize("n", [0, 2, 5])
    def test_rates_by_finite_difference(self, test_system, test_data, moved, n):
        plus, minus = moved
        rates = sc.deformation_derivatives(test_system, test_data, n, VELOCITIES)
        S = test_system
        kp = plus.system.kappa[n] * _align(plus.system.kappa[n], S.kappa[n])
        km = minus.system.kappa[n] * _align(minus.system.kappa[n], S.kappa[n])
        assert abs((kp - km) / (2 * DELTA) / S.kappa[n] - rates.kappa_log) < 1e-6
        assert abs((plus.system.r[n] - minus.system.r[n]) / (2 * DELTA) - rates.r) < 1e-6
        for j in (1, 2):
            zd = VELOCITIES[j - 1] * DELTA
            zp, zm = test_data.zs[j] + zd, test_data.zs[j] - zd
            q = [Q.system.xi_at(n, z) / Q.system.xistar_at(n, z) for Q, z in ((plus, zp), (minus, zm))]
            assert abs((q[0] - q[1]) / (2 * DELTA) - rates.Q_dot[j - 1]) < 1e-6 * max(1, abs(rates.Q_dot[j - 1]))

    @pytest.mark.parametrize("n", [1, 4])
    def test_deformation_ode(self, test_system, test_data, moved, n):
        plus, minus = moved
        rs = sc.residue_set(test_system, test_data, n)
        sp = _align(plus.system.kappa[n], test_system.kappa[n])
        sm = _align(minus.system.kappa[n], test_system.kappa[n])
        for z in POINTS:
            dY = (sp * plus.y(n, z) - sm * minus.y(n, z)) / (2 * DELTA)
            BY = sc.deformation_matrix(rs, test_system, test_data, VELOCITIES, z) @ y_matrix(test_system, TEST_WEIGHT, n, z).entries
            assert np.max(np.abs(dY - BY)) < 1e-6 * max(1, np.max(np.abs(BY)))

    @pytest.mark.parametrize("n", [0, 3])
    def test_schlesinger_equations(self, test_system, test_data, moved, n):
        plus, minus = moved
        rs = sc.residue_set(test_system, test_data, n)
        rhs = sc.schlesinger_rhs(rs, test_system, test_data, VELOCITIES)
        rp = sc.residue_set(plus.system, plus.data, n, tol=np.inf)
        rm = sc.residue_set(minus.system, minus.data, n, tol=np.inf)
        for j in (1, 2):
            assert np.max(np.abs((rp.A[j] - rm.A[j]) / (2 * DELTA) - rhs[j - 1])) < 1e-5

    def test_r_rate_vanishes_for_analytic_weight(self):
        # only nonnegative Fourier modes: r_n = 0 for n >= 1 along the whole family
        spec = factor_spec(("outer", 2, 0.4))
        data = sc.SemiClassicalData.from_spec(spec)
        S = system_of(spec, 5)
        plus = sc.perturb(spec, data, [1.0], DELTA, 5)
        minus = sc.perturb(spec, data, [1.0], -DELTA, 5)
        for n in range(1, 5):
            with pytest.warns(UserWarning, match="nonnegative integer"):
                rate = sc.deformation_derivatives(S, data, n, [1.0]).r
            assert abs(rate) < 1e-8
            assert abs((plus.system.r[n] - minus.system.r[n]) / (2 * DELTA)) < 1e-8


@settings(max_examples=10, deadline=None)
@given(rho1=st.floats(-0.7, 0.9), rho2=st.floats(-0.7, 0.9), n=st.integers(0, 5))
def test_sum_identities_property(rho1, rho2, n):
    spec = factor_spec(("conjugated", 0.4j, rho1), ("outer", -2.5, rho2))
    data = sc.SemiClassicalData.from_spec(spec)
    S = system_of(spec, 6)
    si = sc.sum_identities(S, data, n)
    assert max(abs(v) for v in si.values()) < 1e-9 * max(1, n)
