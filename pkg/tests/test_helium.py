import numpy as np
import pytest

from frozenplanet import frozen, helium, levi_civita, loops, solve
from frozenplanet.errors import AdmissibilityError, DomainError


def random_admissible(rng, n=6):
    coeffs = rng.normal(size=n) * np.exp(-0.8 * np.arange(n))
    coeffs[0] = max(abs(coeffs[0]), 0.5)
    return loops.from_coeffs(loops.ODD_SINE, coeffs)


class TestBridgeConstants:
    def test_consistency(self):
        bc = helium.BridgeConstants()
        assert bc.consistent()
        assert 0.0 < bc.alpha < 1.0
        assert abs(bc.rho - 0.17157287525381) < 1e-12


class TestCOf:
    def test_fundamental_closed_form(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0])
        want = helium.ALPHA ** (-0.5) * np.sqrt(3.0 / 8.0) / np.sqrt(0.5)
        assert abs(helium.c_of(z) - want) < 1e-13

    def test_homogeneity(self):
        rng = np.random.default_rng(0)
        z = random_admissible(rng)
        for lam in (0.5, 2.0):
            zl = loops.from_coeffs(loops.ODD_SINE, lam * z.coeffs)
            assert abs(helium.c_of(zl) - lam * helium.c_of(z)) < 1e-11

    def test_reduced_equation_constants(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0])
        out = helium.bridge_graph_constants(z)
        assert out["w_res"] < 1e-10
        assert out["a1_res"] < 1e-9
        assert out["b1_res"] < 1e-9

    def test_bridge_pair_is_mean_admissible(self):
        rng = np.random.default_rng(1)
        pair = helium.bridge_pair(random_admissible(rng))
        assert helium.mean_gap(pair) > 0


class TestBAv:
    def test_gradient_vanishes_on_bridged_critical_pair(self, cert_rho):
        pair = helium.bridge_pair(cert_rho.z)
        g1, g2 = helium.b_av(pair)["gradient"]
        taus = np.linspace(0, 2, 257)
        assert np.max(np.abs(g1(taus))) < 1e-8
        assert np.max(np.abs(g2(taus))) < 1e-8

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        pair = helium.PairLoop(
            loops.from_coeffs(loops.EVEN_COSINE, [1.6, 0.1, -0.04]),
            loops.from_coeffs(loops.ODD_SINE, [1.0, 0.12, -0.03]),
        )
        obj = helium.PairObjective(0.0, n1=3, n2=3)
        x = obj.pack(pair)
        g = obj.gradient(x)
        h = 1e-6
        for _ in range(10):
            xi = rng.normal(size=6)
            xi /= np.linalg.norm(xi)
            fd = (obj.value(x + h * xi) - obj.value(x - h * xi)) / (2 * h)
            assert abs(fd - float(g @ xi)) / max(1.0, abs(fd)) < 1e-6

    def test_inadmissible_pair_rejected(self):
        pair = helium.PairLoop(
            loops.from_coeffs(loops.EVEN_COSINE, [0.5]),
            loops.from_coeffs(loops.ODD_SINE, [1.0]),
        )
        with pytest.raises(AdmissibilityError):
            helium.b_av(pair)


class TestBridge:
    @pytest.mark.parametrize(
        "coeffs", [[1.0], [1.0, 0.2], [0.8, -0.1, 0.05]]
    )
    def test_identity_exact(self, coeffs):
        z = loops.from_coeffs(loops.ODD_SINE, coeffs)
        assert helium.bridge_check(z) < 1e-12

    def test_hundred_random_loops(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(100):
            z = random_admissible(rng)
            worst = max(worst, helium.bridge_check(z))
        assert worst < 1e-11

    def test_gradient_relation_to_frozen(self, cert_rho):
        # V2(c(z), z) is the frozen gradient up to the dropped -4||z||^2
        rng = np.random.default_rng(4)
        z = random_admissible(rng)
        pair = helium.bridge_pair(z)
        _, g2 = helium.b_av(pair)["gradient"]
        gf = frozen.gradient(z, helium.RHO)
        n = min(g2.n, gf.n)
        num = np.linalg.norm(g2.coeffs[:n] - gf.coeffs[:n])
        den = np.linalg.norm(gf.coeffs[:n])
        assert num / den < 1e-10


class TestD1W:
    def test_recovers_universal_constant(self):
        z = loops.from_coeffs(loops.ODD_SINE, [1.0])
        out = helium.d1w_check(z)
        assert abs(out["K_numeric"] + 2.0 * helium.ALPHA) < 1e-6 * 2 * helium.ALPHA
        assert out["X_sign_ok"]

    def test_scale_invariance(self):
        z = loops.from_coeffs(loops.ODD_SINE, [0.7])
        out = helium.d1w_check(z)
        assert abs(out["K_numeric"] + 2.0 * helium.ALPHA) < 1e-6

    def test_sign_over_random_sweep(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            out = helium.d1w_check(random_admissible(rng))
            assert out["X_sign_ok"]


class TestBIn:
    def test_constant_outer_matches_orbit_quadrature(self):
        gamma = 1.5
        z2 = loops.from_coeffs(loops.ODD_SINE, [0.9, 0.05])
        pair = helium.PairLoop(loops.from_coeffs(loops.EVEN_COSINE, [gamma]), z2)
        out = helium.b_in(pair, n_quad=2048)
        # with constant z1 the interaction is int dt / (gamma^2 - q2(t))
        orbit = levi_civita.forward(z2, n_t=8192)
        t = (np.arange(8192) + 0.5) / 8192
        taus = levi_civita.tau_of_t(z2, t)
        q2 = z2(taus) ** 2
        want = float(np.mean(1.0 / (gamma**2 - q2)))
        g = loops.gram_diag(z2.klass, z2.n)
        l2 = float(np.sum(g * z2.coeffs**2))
        d1 = float(
            np.sum(g * (loops.frequencies(z2.klass, z2.n) * z2.coeffs) ** 2)
        )
        smooth = 2 * (gamma**2 * 0.0 + 1.0 / gamma**2) + 2 * (l2 * d1 + 1.0 / l2)
        assert abs(out["value"] - (smooth - want)) < 1e-5

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        pair = helium.PairLoop(
            loops.from_coeffs(loops.EVEN_COSINE, [1.5, 0.08]),
            loops.from_coeffs(loops.ODD_SINE, [1.0, 0.1]),
        )
        obj = helium.PairObjective(1.0, n1=2, n2=2, n_quad=512)
        x = obj.pack(pair)
        g = obj.gradient(x)
        h = 1e-6
        for _ in range(10):
            xi = rng.normal(size=4)
            xi /= np.linalg.norm(xi)
            fd = (obj.value(x + h * xi) - obj.value(x - h * xi)) / (2 * h)
            assert abs(fd - float(g @ xi)) / max(1.0, abs(fd)) < 1e-6

    def test_pointwise_gap_violation_rejected(self):
        # mean-admissible (0.95^2 > 3/4) yet the pointwise gap closes at
        # the top of the inner orbit, where q2 reaches 1 > 0.95^2
        pair = helium.PairLoop(
            loops.from_coeffs(loops.EVEN_COSINE, [0.95]),
            loops.from_coeffs(loops.ODD_SINE, [1.0]),
        )
        assert helium.mean_gap(pair) > 0
        with pytest.raises(AdmissibilityError):
            helium.b_in(pair)


@pytest.fixture(scope="module")
def interp_pair():
    return helium.PairLoop(
        loops.from_coeffs(loops.EVEN_COSINE, [1.6, 0.05]),
        loops.from_coeffs(loops.ODD_SINE, [1.0, 0.1]),
    )


class TestInterp:
    @pytest.fixture()
    def pair(self, interp_pair):
        return interp_pair

    def test_mean_endpoint(self, pair):
        assert (
            abs(helium.b_interp(pair, 0.0)["value"] - helium.b_av(pair)["value"])
            < 1e-14
        )

    def test_instantaneous_endpoint(self, pair):
        assert (
            abs(helium.b_interp(pair, 1.0)["value"] - helium.b_in(pair)["value"])
            < 1e-14
        )

    def test_linearity_at_half(self, pair):
        mid = helium.b_interp(pair, 0.5)["value"]
        want = 0.5 * (helium.b_av(pair)["value"] + helium.b_in(pair)["value"])
        assert abs(mid - want) < 1e-13

    def test_parameter_domain(self, pair):
        with pytest.raises(DomainError):
            helium.b_interp(pair, 1.5)


class TestMeanCriticalPair:
    def test_resolved_pair_residual(self, mean_pair):
        obj, x = mean_pair
        assert obj.full_residual(x) < 1e-8

    def test_z1_constant(self, mean_pair):
        obj, x = mean_pair
        cert = obj.certify(x)
        assert cert.z1_constancy() < 1e-9

    def test_nullity_zero_and_gap(self, mean_pair):
        obj, x = mean_pair
        rep = solve.spectrum_report(obj.hessian(x))
        assert rep.nullity == 0
        assert rep.min_abs > 1e-4

    def test_constant_direction_curvature_closed_form(self, mean_pair):
        # the one negative direction: d^2/dgamma^2 = (16 - 16 sqrt 2)/c^4
        obj, x = mean_pair
        h = obj.hessian(x)
        pair = obj.unpack(x)
        gamma = float(np.mean(pair.z1(loops.grid_points(64))))
        e0 = np.zeros(obj.n)
        e0[0] = 1.0
        want = (16.0 - 16.0 * np.sqrt(2.0)) / gamma**4
        assert abs(float(e0 @ h @ e0) - want) < 1e-4

    @pytest.mark.parametrize("n1", [4, 8, 16])
    def test_negative_direction_is_truncation_stable(self, cert_rho, n1):
        # exactly one negative eigenvalue at every outer-mode resolution,
        # converged to the constant-direction curvature
        z = loops.from_coeffs(loops.ODD_SINE, cert_rho.z.coeffs[:24])
        pair = helium.bridge_pair(z, n1=n1)
        obj = helium.PairObjective(0.0, n1=n1, n2=24)
        evals = np.linalg.eigvalsh(obj.hessian(obj.pack(pair)))
        gamma = helium.c_of(z)
        want = (16.0 - 16.0 * np.sqrt(2.0)) / gamma**4
        assert int(np.sum(evals < 0)) == 1
        assert abs(evals[0] - want) < 0.2  # eigenvector 99.9% constant

    def test_spectral_lower_bound(self, mean_pair):
        obj, x = mean_pair
        pair = obj.unpack(x)
        out = helium.hessian_bound(obj.hessian(x), pair, obj.n1, obj.n2)
        assert out["ok"]
        (l1, _, _), (l2, _, _) = helium._pair_norms(pair)
        assert abs(out["delta"] - 4.0 * min(l1, l2)) < 1e-12


class TestHomotopy:
    def test_reaches_instantaneous_endpoint(self, homotopy_path):
        assert abs(homotopy_path.steps[-1].parameter - 1.0) < 1e-12
        assert len(homotopy_path.steps) <= 100

    def test_bound_holds_along_path(self, homotopy_path):
        assert all(s.diagnostics["bound_ok"] for s in homotopy_path.steps)

    def test_gradient_fd_validated_at_every_step(self, homotopy_path):
        for step in homotopy_path.steps:
            assert step.diagnostics["grad_fd_rel"] < 1e-6

    def test_nondegenerate_throughout(self, homotopy_path):
        for step in homotopy_path.steps:
            assert step.diagnostics["nullity"] == 0
            assert step.diagnostics["min_abs_eig"] > 1e-4
