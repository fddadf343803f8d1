"""Toeplitz determinants over the lattice of exponent shifts."""

import itertools
import warnings

import numpy as np
import pytest

from artifact import tau
from artifact.errors import DomainError, ShapeError

from conftest import TEST_WEIGHT, circle_moment, factor_spec


@pytest.fixture(scope="module")
def lattice():
    return tau.TauLattice(TEST_WEIGHT)


@pytest.fixture(scope="module")
def base(lattice):
    return lattice.base_system(9)


class TestValues:
    def test_empty_determinant(self, lattice):
        assert lattice.value(0) == 1

    def test_single_shift_is_w0(self, lattice):
        shifted = factor_spec(("conjugated", 0.5, 0.3), ("outer", 2, 1.4))
        w0 = circle_moment(shifted, lambda s: np.ones_like(s))
        assert lattice.value(1, {2: 1}) == pytest.approx(w0, abs=1e-13)

    def test_double_shift_cached_once(self, lattice):
        a = lattice.value(3, {1: 1, 2: 1})
        b = lattice.value(3, {2: 1, 1: 1})
        c = lattice.value(3, (0, 1, 1))
        assert a == b == c
        assert sum(1 for k in lattice._values if k == (3, (0, 1, 1))) == 1

    def test_matches_direct_determinant(self, lattice):
        # a -1 shift at z_1 divides the weight by (z - 0.5)
        w = {k: circle_moment(TEST_WEIGHT, lambda s, k=k: s ** (-k) / (s - 0.5)) for k in range(-4, 5)}
        direct = np.linalg.det(np.array([[w[j - k] for k in range(4)] for j in range(4)]))
        assert lattice.value(4, {1: -1}) == pytest.approx(direct, rel=1e-11)

    def test_depth_limit(self, lattice):
        with pytest.raises(DomainError):
            lattice.value(2, {1: 4})

    def test_bad_index(self, lattice):
        with pytest.raises(ShapeError):
            lattice.value(2, {3: 1})

    def test_negative_size(self, lattice):
        with pytest.raises(ShapeError):
            lattice.value(-1)


class TestTheta:
    def test_labels(self, lattice):
        th = lattice.theta(3)
        assert th[0] == pytest.approx(3.3)
        assert th[1] == pytest.approx(-0.3)
        assert th[2] == pytest.approx(-0.4)
        assert th["inf"] == pytest.approx(3.4)

    @pytest.mark.parametrize("moves", [{1: 1, "inf": 1}, {0: 1, 2: -1}, {0: 2}, {"inf": -1, 1: -1, 2: 2}])
    def test_from_theta_inverts_theta(self, lattice, moves):
        m, key = lattice.from_theta(3, moves)
        th0, th = lattice.theta(3), lattice.theta(m, key)
        for lab in th0:
            assert th[lab] - th0[lab] == pytest.approx(moves.get(lab, 0))

    def test_odd_move(self, lattice):
        with pytest.raises(ShapeError):
            lattice.from_theta(3, {1: 1})

    def test_tau_keywords(self, lattice):
        assert lattice.tau(2, t1=1, tinf=1) == lattice.value(*lattice.from_theta(2, {1: 1, "inf": 1}))


class TestHirota:
    @pytest.mark.parametrize("n", range(7))
    def test_single_index(self, lattice, n):
        for j in (1, 2):
            for r in tau.hirota_residuals(lattice, n, j):
                assert r.residual < 1e-8, r

    @pytest.mark.parametrize("n", range(7))
    def test_pairs(self, lattice, n):
        for j, k in itertools.permutations(range(3), 2):
            if j == 0:
                continue
            for r in tau.hirota_two(lattice, n, j, k):
                assert r.residual < 1e-8, r

    def test_equation_names(self, lattice):
        names = {r.equation for r in tau.hirota_residuals(lattice, 2, 1, 2)}
        assert names == {"HM-a", "HM-b", "HM-d", "HM-e", "HM-f", "HM-g"}

    def test_skips_undefined_sizes(self, lattice):
        names = {r.equation for r in tau.hirota_one(lattice, 0, 1)}
        assert "HM-a" in names

    def test_to_dict(self, lattice):
        d = tau.hirota_residuals(lattice, 1, 1)[0].to_dict()
        assert set(d) >= {"equation", "n", "j", "residual", "normalizer"}

    def test_indeterminate_warns(self):
        with pytest.warns(RuntimeWarning, match="indeterminate"):
            value, norm = tau._residual([0.0, 1e-20])
        assert norm == pytest.approx(1e-20)

    def test_normal_residual_is_relative(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            value, norm = tau._residual([2.0, -1.0, -1.0 + 1e-10])
        assert norm == 2.0
        assert value == pytest.approx(5e-11)


class TestLinks:
    @pytest.mark.parametrize("n", range(6))
    def test_integral_representations(self, lattice, base, n):
        for z in list(lattice.data.zs[1:]) + [2.5 + 1j, 0.3 - 0.4j]:
            res = tau.intrep_residuals(lattice, base, n, z)
            assert max(res.values()) < 1e-9, res

    @pytest.mark.parametrize("n", range(6))
    def test_iform(self, lattice, base, n):
        for j, k in ((1, 2), (2, 1)):
            res = tau.iform_residuals(lattice, base, n, j, k)
            assert max(res.values()) < 1e-8, res
