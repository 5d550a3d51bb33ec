"""Command-line front end: solves, sweeps, verification reports, export.

Every command prints a machine-readable JSON summary on stdout (floats at
17 significant digits; reruns are byte-identical) and writes requested
data files.  Exit codes: 0 when every checked residual is within
tolerance, 1 on a tolerance violation, 2 on a domain or configuration
error.  Error messages name the violated invariant tag.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import detline, elliptic, frozen, helium, levi_civita, loops, serialize, solve
from .errors import FrozenPlanetError


def _echo(args, command):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None}
    cfg["command"] = command
    return cfg


def _emit(payload, ok):
    print(serialize.dumps(payload))
    return 0 if ok else 1


def _write(path, text):
    if path:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args):
    if args.tol <= 0:
        raise FrozenPlanetError("tolerances must be positive", tag="cli.config")
    path = solve.solve_frozen(args.r, n_modes=args.modes)
    cert = path.steps[-1].cert
    bounds = frozen.sup_bounds(cert.z, cert.r)
    ok = (
        cert.grad_res < args.tol
        and max(cert.identity_res) < 1e-7
        and cert.energy_dev < 1e-7
        and bounds["upper_ok"]
    )
    _write(args.out, serialize.dumps({"config": _echo(args, "solve"),
                                      "cert": serialize.cert_to_dict(cert)}) + "\n")
    return _emit(
        {
            "config": _echo(args, "solve"),
            "r": cert.r,
            "grad_res": cert.grad_res,
            "v": cert.v,
            "w": cert.w,
            "identity_res": list(cert.identity_res),
            "energy_dev": cert.energy_dev,
            "sup_upper_ok": bounds["upper_ok"],
            "ok": ok,
        },
        ok,
    )


def cmd_continue(args):
    seed = solve.free_fall_seed(args.modes)
    obj0 = solve.FrozenObjective(0.0, args.modes)
    x0 = obj0.pack(seed.z)
    path = solve.continuation(
        lambda p: solve.FrozenObjective(p, args.modes),
        args.start,
        args.stop,
        x0,
        diagnostics=solve.frozen_step_diagnostics,
        through=(helium.RHO,) if args.start < helium.RHO < args.stop else (),
    )
    records = serialize.path_records(path)
    if args.out:
        with open(args.out, "w") as fh:
            for rec in records:
                fh.write(serialize.dumps(rec).replace("\n", " ") + "\n")
    _write(args.summary, serialize.path_summary_csv(path))
    worst_vw = max(max(s.cert.identity_res) for s in path.steps)
    worst_ode = max(s.diagnostics.get("ode_res", 0.0) for s in path.steps)
    indices = {s.diagnostics.get("morse_index") for s in path.steps}
    ok = worst_vw < 1e-7 and worst_ode < 1e-5 and indices == {0}
    return _emit(
        {
            "config": _echo(args, "continue"),
            "steps": len(path.steps),
            "failures": len(path.failures),
            "worst_identity_res": worst_vw,
            "worst_ode_res": worst_ode,
            "indices": sorted(i for i in indices if i is not None),
            "ok": ok,
        },
        ok,
    )


def cmd_spectrum(args):
    with open(args.input) as fh:
        cert = serialize.cert_from_dict(json.load(fh))
    rep = solve.spectrum(cert, space=args.space)
    payload = {
        "config": _echo(args, "spectrum"),
        "morse_index": rep.morse_index,
        "nullity": rep.nullity,
        "mu": rep.mu,
        "min_abs": rep.min_abs,
        "eigenvalues": list(rep.eigenvalues),
    }
    if rep.kernel_alignment is not None:
        payload["kernel_alignment"] = rep.kernel_alignment
    expected_null = 1 if args.space == "full" else 0
    ok = rep.nullity == expected_null
    return _emit(payload, ok)


def cmd_identity(args):
    with open(args.input) as fh:
        cert = serialize.cert_from_dict(json.load(fh))
    orbit = levi_civita.forward(cert.z, n_t=args.samples)
    qres = levi_civita.q_residual(orbit, cert.r)
    bounds = frozen.sup_bounds(cert.z, cert.r)
    ok = (
        max(cert.identity_res) < 1e-7
        and cert.energy_dev < 1e-7
        and qres["ode_res"] < 1e-5
        and qres["beta_mu_res"] < 1e-5
        and bounds["upper_ok"]
    )
    return _emit(
        {
            "config": _echo(args, "identity"),
            "identity_res": list(cert.identity_res),
            "energy_dev": cert.energy_dev,
            "ode_res": qres["ode_res"],
            "beta_mu_res": qres["beta_mu_res"],
            "sup": bounds["sup"],
            "sup_upper_ok": bounds["upper_ok"],
            "sup_lower_diagnostic": bounds["lower_ok"],
            "ok": ok,
        },
        ok,
    )


def cmd_elliptic(args):
    try:
        lo, hi, step = (float(tok) for tok in args.grid.split(":"))
    except ValueError as exc:
        raise FrozenPlanetError(
            f"grid must be 'lo:hi:step', got {args.grid!r}", tag="cli.grid"
        ) from exc
    if step <= 0 or hi < lo:
        raise FrozenPlanetError("grid range must be well ordered", tag="cli.grid")
    ms = np.arange(lo, hi + 0.5 * step, step)
    ms = ms[ms < 1.0 - 1e-9]
    lines = ["m,I0,I1,I2,I3,I4,K,E,rec_res,i2_res,der_res,riccati_res"]
    worst_rec = 0.0
    for m in ms:
        vals = [elliptic.In(n, m) for n in range(5)]
        k_val, e_val = elliptic.KE(m)
        if abs(m) < 1e-9:
            rep = {"rec_res": 0.0, "i2_res": abs(vals[2] - elliptic.In_zero(2)), "der_res": 0.0}
            ric = 0.0
        else:
            rep = elliptic.identities_report(m)
            ric = elliptic.riccati_residual(m) if abs(m) > 1e-6 else 0.0
        worst_rec = max(worst_rec, rep["rec_res"] or 0.0)
        lines.append(
            ",".join(
                serialize.fmt(x)
                for x in (m, *vals, k_val, e_val, rep["rec_res"] or 0.0,
                          rep["i2_res"], rep["der_res"] or 0.0, ric)
            )
        )
    _write(args.out, "\n".join(lines) + "\n")
    ok = worst_rec < 1e-9
    return _emit(
        {
            "config": _echo(args, "elliptic"),
            "points": int(ms.size),
            "worst_rec_res": worst_rec,
            "ok": ok,
        },
        ok,
    )


def cmd_lc(args):
    with open(args.input) as fh:
        data = json.load(fh)
    z = loops.loop_from_json(data if "class" in data else data["loop"])
    orbit = levi_civita.forward(z, n_t=args.samples)
    _write(args.out, serialize.orbit_to_csv(orbit))
    g = loops.gram_diag(z.klass, z.n)
    l2_sq = float(np.sum(g * z.coeffs**2))
    recip = levi_civita.reciprocal_integral(orbit)
    qbar_quad = levi_civita.qbar_from_samples(orbit)
    recip_res = abs(recip - 1.0 / l2_sq)
    qbar_res = abs(qbar_quad - orbit.qbar)
    qdot_res = abs(levi_civita.qdot_l2_sq(orbit) - 4.0 * l2_sq * float(
        np.sum(g * (loops.frequencies(z.klass, z.n) * z.coeffs) ** 2)
    ))
    ok = recip_res < 1e-6 and qbar_res < 1e-6 and qdot_res < 1e-6
    return _emit(
        {
            "config": _echo(args, "lc"),
            "qbar": orbit.qbar,
            "reciprocal_res": recip_res,
            "qbar_res": qbar_res,
            "qdot_norm_res": qdot_res,
            "zeros": list(orbit.zeros),
            "sign_convention": "z > 0 on (0, 1)",
            "ok": ok,
        },
        ok,
    )


def cmd_helium(args):
    if args.input:
        with open(args.input) as fh:
            pair = serialize.pair_from_dict(json.load(fh))
    else:
        path = solve.solve_frozen(helium.RHO, n_modes=args.modes)
        pair = helium.bridge_pair(path.steps[-1].cert.z)
    if args.mode == "av":
        out = helium.b_av(pair)
    elif args.mode == "in":
        out = helium.b_in(pair)
    else:
        out = helium.b_interp(pair, args.s)
    g1, g2 = out["gradient"]
    res = np.sqrt(
        float(np.sum(loops.gram_diag(g1.klass, g1.n) * g1.coeffs**2))
        + float(np.sum(loops.gram_diag(g2.klass, g2.n) * g2.coeffs**2))
    )
    if args.csv:
        _write(args.csv, serialize.pair_orbit_csv(pair))
    bridge_res = helium.bridge_check(pair.z2)
    ok = bridge_res < 1e-11
    return _emit(
        {
            "config": _echo(args, "helium"),
            "value": out["value"],
            "grad_res": float(res),
            "bridge_res": bridge_res,
            "ok": ok,
        },
        ok,
    )


def cmd_euler(args):
    count = 0
    indices = []
    with open(args.path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records:
        return _emit({"config": _echo(args, "euler"), "euler": 0, "ok": True}, True)
    per_step = []
    for rec in records:
        diag = rec.get("diagnostics", {})
        if "nullity" not in diag or "morse_index" not in diag:
            raise FrozenPlanetError(
                "path records lack spectral diagnostics", tag="cli.euler-input"
            )
        if diag["nullity"] > 0:
            raise FrozenPlanetError(
                "degenerate critical point: count undefined",
                tag="solve.degenerate-point",
            )
        per_step.append((-1) ** diag["morse_index"])
        indices.append(diag["morse_index"])
    count = per_step[-1]
    constant = len(set(per_step)) == 1
    print(count)
    payload = {
        "config": _echo(args, "euler"),
        "euler": count,
        "constant_along_path": constant,
        "indices": indices,
    }
    print(serialize.dumps(payload))
    return 0 if constant else 1


def cmd_detline(args):
    if args.demo != "counterexample":
        raise FrozenPlanetError(
            f"unknown demo {args.demo!r}", tag="cli.detline-demo"
        )
    family = detline.OperatorFamily(n_modes=args.modes, a=args.a, b=args.b)
    result = detline.holonomy(family, n_steps=args.steps)
    _write(args.out, serialize.holonomy_trace_csv(result, args.modes))
    ok = result["sign"] == -1 and result["min_alignment"] > 0.999
    return _emit(
        {
            "config": _echo(args, "detline"),
            "sign": result["sign"],
            "min_alignment": result["min_alignment"],
            "ok": ok,
        },
        ok,
    )


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frozenplanet",
        description="Regularized frozen-planet orbits: solving, identities, "
        "spectra, and determinant-line demos.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the one-loop family at a parameter")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--modes", type=int, default=solve.DEFAULT_MODES)
    p.add_argument("--tol", type=float, default=frozen.CERT_TOL)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("continue", help="parameter continuation with diagnostics")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--modes", type=int, default=solve.DEFAULT_MODES)
    p.add_argument("--out", type=str, default=None, help="JSONL path records")
    p.add_argument("--summary", type=str, default=None, help="CSV summary")
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("spectrum", help="spectral report of a certificate")
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--space", choices=("symmetric", "full"), default="symmetric")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("identity", help="identity residuals of a certificate")
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--samples", type=int, default=8192)
    p.set_defaults(func=cmd_identity)

    p = sub.add_parser("elliptic", help="elliptic-integral table over a grid")
    p.add_argument("--grid", type=str, required=True, help="lo:hi:step")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_elliptic)

    p = sub.add_parser("lc", help="Levi-Civita transform and mean identities")
    p.add_argument("--input", type=str, required=True, help="loop JSON")
    p.add_argument("--samples", type=int, default=8192)
    p.add_argument("--out", type=str, default=None, help="orbit CSV")
    p.set_defaults(func=cmd_lc)

    p = sub.add_parser("helium", help="pair functionals (mean/instantaneous)")
    p.add_argument("--mode", choices=("av", "in", "interp"), required=True)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--input", type=str, default=None, help="pair JSON")
    p.add_argument("--modes", type=int, default=32)
    p.add_argument("--csv", type=str, default=None, help="orbit pair CSV")
    p.set_defaults(func=cmd_helium)

    p = sub.add_parser("euler", help="signed count along a path of records")
    p.add_argument("--path", type=str, required=True, help="JSONL records")
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("detline", help="determinant-line demonstrations")
    p.add_argument("--demo", type=str, default="counterexample")
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_detline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FrozenPlanetError as exc:
        print(
            serialize.dumps({"error": str(exc), "invariant": exc.tag}),
            file=sys.stderr,
        )
        return 2
    except FileNotFoundError as exc:
        print(
            serialize.dumps({"error": str(exc), "invariant": "cli.input"}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
