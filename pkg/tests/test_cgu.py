"""Rational modifications of the weight applied to the system directly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import cgu
from artifact.bops import y_matrix
from artifact.errors import DegeneracyError, DomainError, GenericConditionError, InputError
from artifact.semiclassical import residue_set, spectral_matrix
from artifact.suites import compare_systems
from artifact.weight import modify_weight

from conftest import LEBESGUE, TEST_WEIGHT, factor_spec, system_of

KIND_KEYS = {"K1": "alphas", "L1": "betas", "K1star": "alpha_stars", "L1star": "beta_stars"}


def rebuilt(spec, shift, n_max):
    return system_of(modify_weight(spec, shift.alphas, shift.alpha_stars, shift.betas, shift.beta_stars), n_max)


def up_to_sign(a, b):
    return min(np.max(np.abs(a - b)), np.max(np.abs(a + b)))


class TestShift:
    def test_counts(self):
        s = cgu.CguShift([2.5], [0.5j], [3], [0.4])
        assert s.counts == (1, 1, 1, 1)

    def test_circle_rejected(self):
        with pytest.raises(DomainError):
            cgu.CguShift(alphas=[1j])

    def test_repeat_rejected(self):
        with pytest.raises(GenericConditionError):
            cgu.CguShift(betas=[3, 3])

    def test_dict_roundtrip(self):
        s = cgu.CguShift([2.5 + 1j], [], [3], [0.4])
        assert cgu.CguShift.from_dict(s.to_dict()) == s

    def test_unknown_key(self):
        with pytest.raises(InputError):
            cgu.CguShift.from_dict({"gammas": [2]})


class TestGenerator:
    def test_lebesgue_k1(self, lebesgue_system):
        R = cgu.generator(lebesgue_system, "K1", 2, 1)
        z = 0.3 + 0.45j
        expect = 1j / np.sqrt(2) / (z - 2) * np.array([[z - 2, 0], [z / 2, -2]])
        assert np.max(np.abs(R(z) - expect)) < 1e-13

    def test_lebesgue_l1_prefactor(self, lebesgue_system):
        c = cgu.transformed_coeffs(lebesgue_system, "L1", 2, 1)
        assert c.kappa_sq == pytest.approx(-2, abs=1e-13)

    @pytest.mark.parametrize("kind,loc", [("K1", 3 + 1j), ("L1", 2.5), ("K1star", -0.4), ("L1star", 0.4j)])
    @pytest.mark.parametrize("n", [0, 1, 4])
    def test_maps_y_to_modified_y(self, test_system, kind, loc, n):
        # R_n = Y_n^mod Y_n^-1 with Y^mod from a rebuilt system
        shift = cgu.CguShift(**{KIND_KEYS[kind]: [loc]})
        mspec = modify_weight(TEST_WEIGHT, shift.alphas, shift.alpha_stars, shift.betas, shift.beta_stars)
        O = system_of(mspec, n + 2)
        R = cgu.generator(test_system, kind, loc, n)
        for z in (0.35 + 0.3j, 1.9 - 0.8j):
            direct = y_matrix(O, mspec, n, z).entries @ np.linalg.inv(y_matrix(test_system, TEST_WEIGHT, n, z).entries)
            assert up_to_sign(R(z), direct) < 1e-10 * max(1, np.max(np.abs(direct)))

    @pytest.mark.parametrize("kind,loc", [("K1", 3 + 1j), ("L1", 2.5), ("K1star", -0.4), ("L1star", 0.4j)])
    def test_inverse_pair(self, test_system, kind, loc):
        R = cgu.generator(test_system, kind, loc, 3)
        Ri = cgu.inverse_generator(test_system, kind, loc, 3)
        for z in (0.2 + 0.6j, -1.5 + 0.3j, 2.2j):
            assert np.max(np.abs(Ri(z) @ R(z) - np.eye(2))) < 1e-11

    def test_unknown_kind(self, test_system):
        with pytest.raises(ValueError):
            cgu.transformed_coeffs(test_system, "K2", 2, 1)


class TestTransformedCoeffs:
    def test_lebesgue_k1(self, lebesgue_system):
        c = cgu.transformed_coeffs(lebesgue_system, "K1", 2, 3)
        assert c.kappa_sq == pytest.approx(-0.5, abs=1e-14)
        assert c.r == pytest.approx(0, abs=1e-14)
        assert c.rbar == pytest.approx(0.125, abs=1e-14)

    def test_lebesgue_l1(self, lebesgue_system):
        c = cgu.transformed_coeffs(lebesgue_system, "L1", 2, 2)
        assert c.kappa_sq == pytest.approx(-2, abs=1e-13)
        assert c.r == pytest.approx(0, abs=1e-14)
        assert c.rbar == pytest.approx(0, abs=1e-14)

    def test_lebesgue_l1_degree_one(self, lebesgue_system):
        assert cgu.transformed_coeffs(lebesgue_system, "L1", 2, 1).rbar == pytest.approx(-0.5, abs=1e-14)

    @pytest.mark.parametrize("kind,loc", [("K1", 3 + 1j), ("L1", 3), ("K1star", -0.4), ("L1star", 0.4)])
    def test_rebuild_oracle(self, test_system, kind, loc):
        shift = cgu.CguShift(**{KIND_KEYS[kind]: [loc]})
        O = rebuilt(TEST_WEIGHT, shift, 10)
        for n in range(0, 10):
            c = cgu.transformed_coeffs(test_system, kind, loc, n)
            assert c.kappa_sq == pytest.approx(O.kappa[n] ** 2, rel=1e-9)
            assert abs(c.r - O.r[n]) < 1e-9 * max(1, abs(O.r[n]))
            assert abs(c.rbar - O.rbar[n]) < 1e-9 * max(1, abs(O.rbar[n]))

    def test_degenerate_location(self, lebesgue_system):
        # for w = 1, xi*_n vanishes inside the disk
        with pytest.raises(DegeneracyError):
            cgu.generator(lebesgue_system, "L1", 0.5, 2)


class TestTransformSystem:
    def test_alpha_on_lebesgue(self, lebesgue_system):
        shift = cgu.CguShift(alphas=[2])
        T = cgu.transform_system(lebesgue_system, shift, 8)
        O = rebuilt(LEBESGUE, shift, 8)
        assert max(compare_systems(T, O, 8).values()) < 1e-10

    def test_beta_with_low_degrees(self):
        spec = factor_spec(("outer", 2, 0.4))
        base = system_of(spec, 8)
        shift = cgu.CguShift(betas=[3])
        for layout in ("stable", "printed"):
            T = cgu.transform_system(base, shift, 8, layout=layout)
            O = rebuilt(spec, shift, 8)
            assert max(compare_systems(T, O, 8).values()) < 1e-9, layout

    def test_composite_on_lebesgue(self, lebesgue_system):
        shift = cgu.CguShift(alphas=[2], alpha_stars=[0.5], betas=[3], beta_stars=[0.4])
        T = cgu.transform_system(lebesgue_system, shift, 8)
        O = rebuilt(LEBESGUE, shift, 8)
        assert max(compare_systems(T, O, 8).values()) < 1e-9

    def test_depth_checked(self, test_system):
        with pytest.raises(InputError):
            cgu.transform_system(test_system, cgu.CguShift(alphas=[3]), test_system.n_max)

    def test_bad_layout(self, test_system):
        with pytest.raises(ValueError):
            cgu.transform_system(test_system, cgu.CguShift(alphas=[3]), 2, layout="sideways")

    @settings(max_examples=12, deadline=None)
    @given(
        kind=st.sampled_from(list(KIND_KEYS)),
        r=st.floats(1.3, 3.5),
        t=st.floats(0.3, 2.8),
    )
    def test_single_shift_property(self, test_system, kind, r, t):
        loc = (r if kind in ("K1", "L1") else 1 / r) * np.exp(1j * t)
        shift = cgu.CguShift(**{KIND_KEYS[kind]: [loc]})
        T = cgu.transform_system(test_system, shift, 8)
        O = rebuilt(TEST_WEIGHT, shift, 8)
        assert max(compare_systems(T, O, 8).values()) < 1e-8


class TestCompatibility:
    def test_lebesgue_recurrence(self, lebesgue_system):
        assert np.max(np.abs(cgu.recurrence_compat_residual(lebesgue_system, "K1", 2, 1, 0.3))) < 1e-12

    def test_recurrence_on_pole_weight(self):
        S = system_of(factor_spec(("outer", 3, -1)), 6)
        assert np.max(np.abs(cgu.recurrence_compat_residual(S, "L1", 2, 2, 1.7))) < 1e-10

    @pytest.mark.parametrize("kind,loc", [("K1", 3 + 1j), ("L1", 3), ("K1star", -0.4), ("L1star", 0.4)])
    def test_recurrence_rings(self, test_system, kind, loc):
        zs = np.r_[0.5 * np.exp(2j * np.pi * (np.arange(8) + 0.25) / 8), 2 * np.exp(2j * np.pi * (np.arange(8) + 0.25) / 8)]
        worst = max(np.max(np.abs(cgu.recurrence_compat_residual(test_system, kind, loc, n, z))) for n in range(6) for z in zs)
        assert worst < 1e-10

    @pytest.mark.parametrize("kind,loc,n,z", [("K1", 2, 2, 0.7), ("L1", 2, 3, 1.5j), ("K1", 4, 2, 0.7 + 0.3j)])
    def test_spectral(self, test_system, test_data, kind, loc, n, z):
        rs = residue_set(test_system, test_data, n)

        def a_n(x):
            return spectral_matrix(rs, test_data, x)

        res = cgu.spectral_compat_residual(test_system, a_n, kind, loc, n, z)
        scale = max(1, np.max(np.abs(cgu.generator(test_system, kind, loc, n)(z) @ a_n(z))))
        assert np.max(np.abs(res)) / scale < 1e-8


class TestColumns:
    @pytest.mark.parametrize("layout", ["stable", "printed"])
    def test_one_column_per_constraint_plus_one(self, layout):
        for counts in [(1, 1, 1, 1), (2, 0, 1, 0), (0, 1, 0, 2)]:
            for n in range(5):
                assert len(cgu.columns(n, counts, layout)) == sum(counts) + 1
