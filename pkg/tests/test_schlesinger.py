"""Integer shifts of the singular-point exponents."""

import numpy as np
import pytest

from artifact import cgu
from artifact import schlesinger as sch
from artifact.bops import y_matrix
from artifact.errors import InapplicableError, InputError, ShapeError
from artifact.semiclassical import residue_set, spectral_matrix

from conftest import TEST_WEIGHT, system_of

PAIRS = [(1, 1), (1, -1), (2, 1), (2, -1)]
POINTS = [0.35 + 0.3j, -0.6 + 0.2j, 0.1 - 0.7j, 1.5 + 0.9j, -2.2 + 0.4j, 0.3 - 2.6j, 3.1 + 0.5j, -0.9 - 1.4j]


def up_to_sign(a, b):
    return min(np.max(np.abs(a - b)), np.max(np.abs(a + b)))


@pytest.fixture(scope="module")
def rebuilt():
    """Systems of the shifted weights, built from scratch."""
    data = sch.SemiClassicalData.from_spec(TEST_WEIGHT)
    out = {}
    for j, d in PAIRS:
        spec = sch.shifted_spec(TEST_WEIGHT, data, sch.ExponentShift.single(2, j, d).shifts)
        out[j, d] = (spec, system_of(spec, 10))
    return out


class TestExponentShift:
    def test_single(self):
        assert sch.ExponentShift.single(2, 1, -1).shifts == (0, -1, 0)

    def test_request_list(self):
        s = sch.ExponentShift.from_request([{"j": 1, "direction": 1}, {"j": 2, "direction": -1}], 2)
        assert s.shifts == (0, 1, -1)

    def test_theta_labels(self):
        th = sch.ExponentShift((0, 1, 0)).theta_shift()
        assert th == {0: 0, 1: -1, 2: 0, "inf": 1}

    @pytest.mark.parametrize("req", [{"j": 3, "direction": 1}, {"j": 1, "direction": 2}, {"direction": 1}, [1, 2]])
    def test_bad_requests(self, req):
        with pytest.raises(InputError):
            sch.ExponentShift.from_request(req, 2)

    def test_non_integer(self):
        with pytest.raises(ShapeError):
            sch.ExponentShift((0, 0.5, 0))

    def test_shifted_spec_exponent(self, test_data):
        spec = sch.shifted_spec(TEST_WEIGHT, test_data, (0, 0, 1))
        assert sch.SemiClassicalData.from_spec(spec).rhos[2] == pytest.approx(1.4)

    def test_shift_data(self, test_data):
        assert np.allclose(sch.shift_data(test_data, (0, -1, 0)).rhos, [-0.3, -0.7, 0.4])


class TestMatrix:
    @pytest.mark.parametrize("j", [1, 2])
    @pytest.mark.parametrize("n", [0, 2, 5])
    def test_inverse_pair(self, test_system, test_data, j, n):
        T, Dm = sch.shifted_system(test_system, test_data, j, 1, 10)
        up = sch.schlesinger_matrix(test_system, test_data, j, 1, n)
        down = sch.schlesinger_matrix(T, Dm, j, -1, n)
        for z in POINTS:
            assert np.max(np.abs(down(z) @ up(z) - np.eye(2))) < 1e-10

    @pytest.mark.parametrize("j", [1, 2])
    def test_closed_form_inverse(self, test_system, test_data, j):
        for d in (1, -1):
            R = sch.schlesinger_matrix(test_system, test_data, j, d, 3)
            Ri = sch.schlesinger_inverse(test_system, test_data, j, d, 3)
            for z in POINTS:
                assert np.max(np.abs(Ri(z) @ R(z) - np.eye(2))) < 1e-10

    @pytest.mark.parametrize("j", [1, 2])
    def test_determinant(self, test_system, test_data, j):
        R = sch.schlesinger_matrix(test_system, test_data, j, 1, 4)
        zj = test_data.zs[j]
        for z in POINTS:
            assert R.det(z) * (z - zj) == pytest.approx(1, abs=1e-10)

    @pytest.mark.parametrize("j,d", PAIRS)
    def test_is_cgu_generator_at_singular_point(self, test_system, test_data, j, d):
        R = sch.schlesinger_matrix(test_system, test_data, j, d, 3)
        G = cgu.generator(test_system, "K1" if d == 1 else "L1", test_data.zs[j], 3)
        for z in POINTS:
            assert np.max(np.abs(R(z) - G(z))) < 1e-13

    @pytest.mark.parametrize("j,d", PAIRS)
    def test_maps_y_to_shifted_y(self, test_system, test_data, rebuilt, j, d):
        spec, O = rebuilt[j, d]
        R = sch.schlesinger_matrix(test_system, test_data, j, d, 3)
        for z in POINTS[:4]:
            direct = y_matrix(O, spec, 3, z).entries @ np.linalg.inv(y_matrix(test_system, TEST_WEIGHT, 3, z).entries)
            assert up_to_sign(R(z), direct) < 1e-9 * max(1, np.max(np.abs(direct)))

    def test_origin_is_not_a_location(self, test_system, test_data):
        with pytest.raises(InapplicableError):
            sch.schlesinger_matrix(test_system, test_data, 0, 1, 2)


class TestShiftedCoeffs:
    def test_up_at_two(self, test_system, test_data, rebuilt):
        c = sch.shifted_coeffs(test_system, test_data, 2, 1, 3)
        O = rebuilt[2, 1][1]
        assert abs(c.kappa_sq - O.kappa[3] ** 2) < 1e-8

    @pytest.mark.parametrize("j,d", PAIRS)
    def test_rebuild_oracle(self, test_system, test_data, rebuilt, j, d):
        O = rebuilt[j, d][1]
        for n in range(9):
            c = sch.shifted_coeffs(test_system, test_data, j, d, n, forms=False)
            for got, want in ((c.kappa_sq, O.kappa[n] ** 2), (c.r, O.r[n]), (c.rbar, O.rbar[n])):
                assert abs(got - want) < 1e-8 * max(1, abs(want))

    @pytest.mark.parametrize("j", [1, 2])
    def test_two_forms_of_up_shift(self, test_system, test_data, j):
        for n in range(9):
            c = sch.shifted_coeffs(test_system, test_data, j, 1, n, forms=True, tol=np.inf)
            assert c.forms_residual < 1e-9

    @pytest.mark.parametrize("j,d", PAIRS)
    def test_round_trip(self, test_system, test_data, j, d):
        T, Dm = sch.shifted_system(test_system, test_data, j, d, 10)
        for n in range(1, 7):
            c = sch.shifted_coeffs(T, Dm, j, -d, n, forms=False)
            S = test_system
            assert abs(c.kappa_sq - S.kappa[n] ** 2) < 1e-9 * max(1, abs(S.kappa[n] ** 2))
            assert abs(c.r - S.r[n]) < 1e-9 * max(1, abs(S.r[n]))
            assert abs(c.rbar - S.rbar[n]) < 1e-9 * max(1, abs(S.rbar[n]))


class TestShiftedEvaluations:
    @pytest.mark.parametrize("j,d", [(2, 1), (1, 1)])
    @pytest.mark.parametrize("n", [1, 4])
    def test_rebuild_oracle(self, test_system, test_data, rebuilt, j, d, n):
        O = rebuilt[j, d][1]
        ev = sch.shifted_evaluations(test_system, test_data, j, d, n)
        s = 1 if abs(ev.kappa - O.kappa[n]) < abs(ev.kappa + O.kappa[n]) else -1
        for k in (1, 2):
            zk = test_data.zs[k]
            want = [O.phi_at(n, zk), O.phistar_at(n, zk)]
            if k != j:
                want += [O.xi_at(n, zk), O.xistar_at(n, zk)]
            got = [ev.phi[k - 1], ev.phistar[k - 1], ev.xi[k - 1], ev.xistar[k - 1]][: len(want)]
            for g, w in zip(got, want):
                assert abs(s * g - w) < 1e-8 * max(1, abs(w))

    @pytest.mark.parametrize("j,d", PAIRS)
    @pytest.mark.parametrize("n", [1, 3])
    def test_casoratian_transfers(self, test_system, test_data, j, d, n):
        ev = sch.shifted_evaluations(test_system, test_data, j, d, n)
        for k in (1, 2):
            zk = test_data.zs[k]
            c3 = ev.phi[k - 1] * ev.xistar[k - 1] + ev.xi[k - 1] * ev.phistar[k - 1] - 2 * zk**n
            assert abs(c3) < 1e-8 * max(1, abs(2 * zk**n))


class TestTransformedResidues:
    @pytest.mark.parametrize("j,d", PAIRS)
    @pytest.mark.parametrize("n", [0, 2, 5])
    def test_two_routes(self, test_system, test_data, j, d, n):
        rs = residue_set(test_system, test_data, n, tol=np.inf)
        a = sch.transformed_residues(rs, test_system, test_data, j, d, n)
        b = sch.transformed_residues(rs, test_system, test_data, j, d, n, route="conjugation")
        scale = max(1, max(np.max(np.abs(x)) for x in b.A))
        assert max(np.max(np.abs(x - y)) for x, y in zip(a.A, b.A)) < 1e-9 * scale

    @pytest.mark.parametrize("j", [1, 2])
    @pytest.mark.parametrize("n", [0, 3])
    def test_eigenvalues_at_shifted_point(self, test_system, test_data, j, n):
        rs = residue_set(test_system, test_data, n)
        A = sch.transformed_residues(rs, test_system, test_data, j, 1, n).A[j]
        ev = np.sort_complex(np.linalg.eigvals(A))
        want = np.sort_complex(np.array([0, -(test_data.rhos[j] + 1)]))
        assert np.max(np.abs(ev - want)) < 1e-8

    @pytest.mark.parametrize("j,d", PAIRS)
    def test_sum_rule(self, test_system, test_data, j, d):
        rs = residue_set(test_system, test_data, 3)
        t = sch.transformed_residues(rs, test_system, test_data, j, d, 3)
        assert np.max(np.abs(sum(t.A) + t.A_inf)) < 1e-9 * max(1, np.max(np.abs(t.A_inf)))

    def test_matches_rebuilt_spectral_matrix(self, test_system, test_data, rebuilt):
        spec, O = rebuilt[2, 1]
        Dm = sch.shift_data(test_data, (0, 0, 1))
        t = sch.transformed_residues(residue_set(test_system, test_data, 3), test_system, test_data, 2, 1, 3)
        direct = residue_set(O, Dm, 3, tol=np.inf)
        for z in POINTS[:3]:
            assert np.max(np.abs(spectral_matrix(t, Dm, z) - spectral_matrix(direct, Dm, z))) < 1e-8


class TestCompatibility:
    @pytest.mark.parametrize("j,d", PAIRS)
    @pytest.mark.parametrize("n", [0, 3, 6])
    def test_recurrence_and_spectral(self, test_system, test_data, j, d, n):
        for z in POINTS:
            rel = sch.compatibility_residuals(test_system, test_data, j, d, n, z).relative()
            assert rel["recurrence"] < 1e-10
            assert rel["spectral"] < 1e-8

    @pytest.mark.parametrize("j,d", [(2, 1), (1, -1)])
    def test_deformation(self, test_system, test_data, j, d):
        cr = sch.compatibility_residuals(
            test_system, test_data, j, d, 2, 0.4 + 0.5j, velocities=[1.0, 0.5j], spec=TEST_WEIGHT, delta=1e-5
        )
        assert cr.relative()["deformation"] < 1e-5


class TestCommutativity:
    @pytest.mark.parametrize("dj,dk", [(1, 1), (1, -1), (-1, -1)])
    @pytest.mark.parametrize("n", [1, 3])
    def test_orders_agree(self, test_system, test_data, dj, dk, n):
        c = sch.commutativity_residual(test_system, test_data, 1, 2, dj, dk, n, 1.7 + 0.6j)
        assert np.max(np.abs(c.residual)) < 1e-9
        assert abs(c.kappa_sq_jk - c.kappa_sq_kj) < 1e-10 * max(1, abs(c.kappa_sq_jk))

    @pytest.mark.parametrize("n", [0, 2, 4])
    def test_double_up_closed_form(self, test_system, test_data, n):
        c = sch.commutativity_residual(test_system, test_data, 1, 2, 1, 1, n, 0.5j)
        assert abs(c.kappa_sq_formula - c.kappa_sq_jk) < 1e-10 * max(1, abs(c.kappa_sq_jk))

    def test_needs_distinct_points(self, test_system, test_data):
        with pytest.raises(ShapeError):
            sch.commutativity_residual(test_system, test_data, 1, 1, 1, 1, 2, 0.5j)
