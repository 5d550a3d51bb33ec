"""Shared fixtures: solved continuation paths reused across test modules."""

import time

import numpy as np
import pytest

from frozenplanet import helium, loops, solve

TIMINGS = {}


def _timed(key, fn):
    t0 = time.perf_counter()
    out = fn()
    TIMINGS[key] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def timings():
    """Construction times of the shared heavy fixtures (for budget checks)."""
    return TIMINGS


@pytest.fixture(scope="session")
def seed64():
    return solve.free_fall_seed(64)


@pytest.fixture(scope="session")
def frozen_path():
    """Continuation of the one-loop family from 0 through rho to 5, N = 64."""

    def run():
        seed = solve.free_fall_seed(64)
        obj0 = solve.FrozenObjective(0.0, 64)
        return solve.continuation(
            lambda p: solve.FrozenObjective(p, 64),
            0.0,
            5.0,
            obj0.pack(seed.z),
            diagnostics=solve.frozen_step_diagnostics,
            through=(helium.RHO,),
        )

    return _timed("frozen_path", run)


@pytest.fixture(scope="session")
def cert_rho(frozen_path):
    """The certified critical point at r = rho from the shared path."""
    for step in frozen_path.steps:
        if abs(step.parameter - helium.RHO) < 1e-12:
            return step.cert
    raise AssertionError("rho waypoint missing from the continuation path")


@pytest.fixture(scope="session")
def mean_pair(cert_rho):
    """The mean-interaction critical pair, re-solved in pair coordinates."""

    def run():
        obj = helium.PairObjective(0.0, n1=12, n2=32)
        pair0 = helium.bridge_pair(
            loops.from_coeffs(loops.ODD_SINE, cert_rho.z.coeffs[:32]), n1=12
        )
        x0 = obj.pack(pair0)
        rng = np.random.default_rng(3)
        x0 = x0 + 1e-4 * rng.normal(size=x0.size)
        rep = solve.newton(obj, x0, tol=1e-10)
        return obj, rep.x

    return _timed("mean_pair", run)


@pytest.fixture(scope="session")
def homotopy_path(cert_rho):
    """Pair continuation from the mean to the instantaneous interaction."""

    def diagnostics(obj, x, rep):
        pair = obj.unpack(x)
        h = obj.hessian(x)
        srep = solve.spectrum_report(h)
        hb = helium.hessian_bound(h, pair, obj.n1, obj.n2)
        rng = np.random.default_rng(11)
        xi = rng.normal(size=obj.n)
        xi /= np.linalg.norm(xi)
        hstep = 1e-5
        fd = (obj.value(x + hstep * xi) - obj.value(x - hstep * xi)) / (2 * hstep)
        ip = float(obj.gradient(x) @ xi)
        return {
            "morse_index": srep.morse_index,
            "nullity": srep.nullity,
            "min_abs_eig": srep.min_abs,
            "bound_ok": hb["ok"],
            "R_bound": hb["R_bound"],
            "min_hess_eig": hb["min_eig"],
            "grad_fd_rel": abs(fd - ip) / max(1.0, abs(fd)),
        }

    def run():
        z32 = loops.from_coeffs(loops.ODD_SINE, cert_rho.z.coeffs[:32])
        pair0 = helium.bridge_pair(z32, n1=16)
        obj0 = helium.PairObjective(0.0, n1=16, n2=32)
        return solve.continuation(
            lambda s: helium.PairObjective(s, n1=16, n2=32),
            0.0,
            1.0,
            obj0.pack(pair0),
            tol=1e-9,
            diagnostics=diagnostics,
            newton_kwargs={"jacobian": "frozen"},
        )

    return _timed("homotopy_path", run)
