import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frozenplanet import frozen, loops
from frozenplanet.errors import ClassMismatchError, DomainError


def grid(m=64):
    return loops.grid_points(m)


class TestAnalyze:
    def test_sine_basis_element(self):
        z = loops.analyze(np.sin(np.pi * grid()), loops.ODD_SINE)
        assert abs(z.coeffs[0] - 1.0) < 1e-13
        assert np.max(np.abs(z.coeffs[1:])) < 1e-13

    def test_cosine_basis_element(self):
        z = loops.analyze(np.cos(2 * np.pi * grid()), loops.EVEN_COSINE)
        assert abs(z.coeffs[1] - 1.0) < 1e-13
        assert abs(z.coeffs[0]) < 1e-14

    def test_parity_violation_rejected(self):
        with pytest.raises(ClassMismatchError):
            loops.analyze(np.sin(np.pi * grid()), loops.EVEN_COSINE)

    def test_band_limited_reproduction(self):
        g = grid(128)
        samples = 0.7 * np.sin(np.pi * g) - 0.2 * np.sin(5 * np.pi * g)
        z = loops.analyze(samples, loops.ODD_SINE)
        assert np.max(np.abs(z(g) - samples)) < 1e-12

    def test_sample_count_multiple_of_four(self):
        with pytest.raises(DomainError):
            loops.analyze(np.zeros(30), loops.ODD_SINE)


class TestNorms:
    def test_fundamental_sine(self):
        n = loops.norms(loops.from_coeffs(loops.ODD_SINE, [1.0]))
        assert abs(n["l2"] ** 2 - 0.5) < 1e-13
        assert abs(n["l2_deriv"] ** 2 - np.pi**2 / 2) < 1e-11
        assert abs(n["l2_square"] ** 2 - 3.0 / 8.0) < 1e-13
        assert abs(n["sup"] - 1.0) < 1e-10

    def test_homogeneity(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, -0.3])
        zc = loops.from_coeffs(loops.ODD_SINE, 0.5 * z.coeffs)
        n, nc = loops.norms(z), loops.norms(zc)
        assert abs(nc["l2"] - 0.5 * n["l2"]) < 1e-13
        assert abs(nc["l2_deriv"] - 0.5 * n["l2_deriv"]) < 1e-12
        assert abs(nc["l2_square"] - 0.25 * n["l2_square"]) < 1e-13
        assert abs(nc["sup"] - 0.5 * n["sup"]) < 1e-10

    def test_cosine_l2(self):
        n = loops.norms(loops.from_coeffs(loops.EVEN_COSINE, [0.0, 1.0]))
        assert abs(n["l2"] ** 2 - 0.5) < 1e-13


class TestDerivative:
    def test_fundamental(self):
        d = loops.derivative(loops.from_coeffs(loops.ODD_SINE, [1.0]))
        taus = np.linspace(0, 2, 41)
        assert np.max(np.abs(d(taus) - np.pi * np.cos(np.pi * taus))) < 1e-12
        assert d.symmetry_note == "odd-cosine"

    def test_constant_maps_to_zero(self):
        d = loops.derivative(loops.from_coeffs(loops.EVEN_COSINE, [2.0]))
        assert np.max(np.abs(d(np.linspace(0, 2, 17)))) < 1e-14

    def test_third_harmonic(self):
        d = loops.derivative(loops.from_coeffs(loops.ODD_SINE, [0.0, 1.0]))
        taus = np.linspace(0, 2, 41)
        assert np.max(np.abs(d(taus) - 3 * np.pi * np.cos(3 * np.pi * taus))) < 1e-12


class TestRescaleCover:
    def test_substitution(self):
        z3 = loops.rescale_cover(loops.from_coeffs(loops.ODD_SINE, [1.0]), 3)
        taus = np.linspace(0, 2, 37)
        want = 3.0 ** (-1 / 3) * np.sin(3 * np.pi * taus)
        assert np.max(np.abs(z3(taus) - want)) < 1e-13

    def test_identity_cover(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.2])
        assert loops.rescale_cover(z, 1) is z

    def test_even_cover_leaves_class(self):
        with pytest.raises(ClassMismatchError):
            loops.rescale_cover(loops.from_coeffs(loops.ODD_SINE, [1.0]), 2)

    def test_critical_point_covariance(self, cert_rho):
        z3 = loops.rescale_cover(cert_rho.z, 3)
        a3 = cert_rho.coeffs.a * 3.0 ** (8.0 / 3.0)
        b3 = cert_rho.coeffs.b * 9.0
        assert frozen.ode_residual(z3, a3, b3) < 1e-8


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=6))
    def test_parseval(self, coeffs):
        z = loops.from_coeffs(loops.ODD_SINE, coeffs)
        quad_l2 = np.sqrt(np.mean(z.quad_samples() ** 2))
        coeff_l2 = np.sqrt(np.sum(loops.gram_diag(z.klass, z.n) * z.coeffs**2))
        assert abs(quad_l2 - coeff_l2) < 1e-12 * max(1.0, coeff_l2)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=6))
    def test_analyze_synthesize_roundtrip(self, coeffs):
        z = loops.from_coeffs(loops.ODD_SINE, coeffs, m=64)
        z2 = loops.analyze(z.grid, loops.ODD_SINE)
        n = min(z.n, z2.n)
        assert np.max(np.abs(z2.coeffs[:n] - z.coeffs[:n])) < 1e-13
        assert np.max(np.abs(z2.coeffs[n:])) < 1e-13

    def test_cube_stays_in_class(self):
        rng = np.random.default_rng(5)
        z = loops.from_coeffs(loops.ODD_SINE, rng.normal(size=5))
        z3 = loops.cube(z)
        assert z3.klass == loops.ODD_SINE
        taus = np.linspace(0.05, 1.95, 31)
        assert np.max(np.abs(z3(taus) - z(taus) ** 3)) < 1e-11

    def test_product_with_even_cosine_keeps_class(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.3])
        c = loops.from_coeffs(loops.EVEN_COSINE, [0.5, 0.25])
        taus = loops.grid_points(loops.quad_size(8))
        prod = z(taus) * c(taus)
        back = loops.analyze(prod, loops.ODD_SINE)
        assert np.max(np.abs(back(taus) - prod)) < 1e-12

    def test_min_grid_invariant(self):
        with pytest.raises(DomainError):
            loops.Loop(loops.ODD_SINE, np.ones(8), np.zeros(16))


class TestSerialization:
    def test_json_roundtrip(self):
        z = loops.from_coeffs(loops.ODD_SINE, [0.9, -0.1, 0.02])
        z2 = loops.loop_from_json(loops.loop_to_json(z))
        assert z2.klass == z.klass
        assert np.array_equal(z2.coeffs, z.coeffs)
        taus = np.linspace(0, 2, 11)
        assert np.max(np.abs(z2(taus) - z(taus))) < 1e-15
