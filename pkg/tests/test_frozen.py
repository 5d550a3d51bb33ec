import numpy as np
import pytest

from frozenplanet import frozen, loops, solve
from frozenplanet.errors import DomainError, PreconditionError

RHO = (np.sqrt(2.0) - 1.0) ** 2
AMP = (2.0 / np.pi) ** (1.0 / 3.0)


def random_loop(rng, n=8, floor=0.4):
    coeffs = rng.normal(size=n) * np.exp(-0.6 * np.arange(n))
    coeffs[0] = np.sign(coeffs[0] or 1.0) * max(abs(coeffs[0]), floor)
    return loops.from_coeffs(loops.ODD_SINE, coeffs)


class TestValue:
    def test_fundamental_r0(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0])
        assert abs(frozen.value(z, 0.0) - (np.pi**2 / 2 + 4.0)) < 1e-12

    def test_fundamental_r1(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0])
        assert abs(frozen.value(z, 1.0) - (np.pi**2 / 2 + 4.0 + 4.0 / 3.0)) < 1e-12

    def test_scaling_homogeneity(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.2])
        g = loops.gram_diag(z.klass, z.n)
        w = loops.frequencies(z.klass, z.n)
        l2_sq = np.sum(g * z.coeffs**2)
        d1_sq = np.sum(g * (w * z.coeffs) ** 2)
        for c in (0.5, 2.0):
            zc = loops.from_coeffs(loops.ODD_SINE, c * z.coeffs)
            want = c**4 * 2.0 * l2_sq * d1_sq + 2.0 / (c**2 * l2_sq)
            assert abs(frozen.value(zc, 0.0) - want) < 1e-11

    def test_zero_loop_rejected(self):
        with pytest.raises(DomainError):
            frozen.value(loops.from_coeffs(loops.ODD_SINE, [0.0]), 0.0)


class TestGradient:
    def test_free_fall_residual(self):
        z = loops.from_coeffs(loops.ODD_SINE, [AMP, 0.0, 0.0, 0.0])
        gl = frozen.gradient(z, 0.0)
        taus = np.linspace(0, 2, 257)
        assert np.max(np.abs(gl(taus))) < 1e-10

    def test_linear_part_coefficient(self):
        # for the plain fundamental at r = 0 the gradient is -4||z||^2 (z'' + b z)
        z = loops.from_coeffs(loops.ODD_SINE, [1.0])
        b = 8.0 - np.pi**2
        gl = frozen.gradient(z, 0.0)
        want = -4.0 * 0.5 * (-np.pi**2 + b)
        assert abs(gl.coeffs[0] - want) < 1e-12
        assert np.max(np.abs(gl.coeffs[1:])) < 1e-12

    @pytest.mark.parametrize("r", [0.0, 0.1, RHO, 1.0, 5.0])
    def test_matches_finite_differences(self, r):
        rng = np.random.default_rng(17)
        z = random_loop(rng)
        gl = frozen.gradient(z, r)
        g = loops.gram_diag(gl.klass, gl.n)
        h = 1e-6
        for _ in range(20):
            xi = rng.normal(size=z.n)
            zp = z.with_coeffs(z.coeffs + h * xi)
            zm = z.with_coeffs(z.coeffs - h * xi)
            fd = (frozen.value(zp, r) - frozen.value(zm, r)) / (2 * h)
            ip = float(np.sum(g[: z.n] * gl.coeffs[: z.n] * xi))
            assert abs(ip - fd) / max(1.0, abs(fd)) < 1e-6


class TestHessian:
    def test_free_fall_positive_definite(self, seed64):
        h = frozen.hessian(seed64.z, 0.0, at_critical=True)
        evals = np.linalg.eigvalsh(h)
        assert np.all(evals > 0)

    def test_symmetry_at_certified_point(self, cert_rho):
        h = frozen.hessian_analytic(cert_rho.z, cert_rho.r)
        assert np.max(np.abs(h - h.T)) < 1e-8

    def test_analytic_matches_finite_differences(self, cert_rho):
        z32 = loops.from_coeffs(loops.ODD_SINE, cert_rho.z.coeffs[:24])
        h1 = frozen.hessian_analytic(z32, cert_rho.r)
        h2 = frozen._hessian_fd(z32, cert_rho.r, 1e-6)
        assert np.max(np.abs(h1 - h2)) < 1e-5

    def test_fd_mode_symmetry(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.2, -0.05, 0.01])
        h = frozen._hessian_fd(z, 0.7, 1e-6)
        assert np.max(np.abs(h - h.T)) < 1e-8

    def test_off_critical_precondition(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.3])
        with pytest.raises(PreconditionError):
            frozen.hessian(z, 1.0, at_critical=True)
        h = frozen.hessian(z, 1.0, at_critical=False)
        assert h.shape == (2, 2)


class TestEnergy:
    def test_free_fall_constant(self):
        z = loops.from_coeffs(loops.ODD_SINE, [AMP, 0.0, 0.0, 0.0])
        out = frozen.energy_check(z, 0.0)
        assert abs(out["c"] - np.pi**2 * AMP**2) < 1e-12
        assert out["deviation"] < 1e-8

    def test_certified_point(self, cert_rho):
        out = frozen.energy_check(cert_rho.z, cert_rho.r)
        assert out["deviation"] < 1e-7
        assert out["c"] > 0

    def test_noncritical_diagnostic(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.3])
        out = frozen.energy_check(z, 1.0)
        assert out["deviation"] > 0.1  # conservation only holds at critical points


class TestShapeIdentity:
    def test_free_fall_values(self, seed64):
        assert abs(seed64.v - 0.5) < 1e-10
        assert abs(seed64.w - 4.0 / 3.0) < 1e-9
        res1, res2 = frozen.vw_identity(seed64)
        assert res1 < 1e-10 and res2 < 1e-10

    def test_certified_point(self, cert_rho):
        res1, res2 = frozen.vw_identity(cert_rho)
        assert res1 < 1e-7 and res2 < 1e-7

    def test_both_b_forms_agree_at_critical(self, cert_rho):
        b_gen, b_crit = frozen.both_b_forms(cert_rho.z, cert_rho.r)
        assert abs(b_gen - b_crit) < 1e-8

    def test_b_forms_differ_off_critical(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0, 0.4])
        b_gen, b_crit = frozen.both_b_forms(z, 1.0)
        assert abs(b_gen - b_crit) > 1e-3


class TestBounds:
    def test_upper_bound_gate(self, cert_rho):
        out = frozen.sup_bounds(cert_rho.z, cert_rho.r)
        assert out["upper_ok"]

    def test_lower_bound_is_diagnostic_only(self, seed64):
        # the explicit free-fall amplitude sits below 1 under this
        # normalization; the lower bound is reported, not gated
        out = frozen.sup_bounds(seed64.z, 0.0)
        assert not out["lower_ok"]
        assert abs(out["sup"] - AMP) < 1e-9


class TestNondegeneracy:
    def test_invertible_on_symmetric_space(self, cert_rho):
        rep = solve.spectrum(cert_rho)
        assert rep.nullity == 0
        assert rep.min_abs > 1e-4
