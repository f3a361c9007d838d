"""Command-line front end: ``maxdde <command> [--preset ex2 | --problem file.json] ...``"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import chaos, closedform
from .core import (NormalizedProblem, ProblemError, ftilde_inverse, load_problem, preset,
                   stability_check)
from .fundamental import V_roots
from .integrator import integrate
from .io import write_csv, write_events, write_json, write_projection, write_trajectory
from .return_map import (R_value, ReturnMapError, beta1, find_discontinuities, fixed_points,
                         q0_applicable, q0_root, return_map_grid)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2

APPENDIX_REFERENCE = {"min_psi": 0.0086, "min_increment": 0.02057, "max_phi": -0.0615}


def _problem(args) -> NormalizedProblem:
    if args.problem:
        return load_problem(args.problem)
    return preset(args.preset or "ex2")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _positive(name, value):
    if value is not None and not value > 0:
        raise ProblemError(f"--{name} must be positive")


def cmd_simulate(args) -> int:
    prob = _problem(args)
    out = _outdir(args)
    p = 0.0 if args.p is None else args.p
    in_K = 0.0 <= p <= prob.ftilde_max
    t0 = ftilde_inverse(prob, p) if in_K else 0.0
    duration = 350.0 if args.tmax is None else args.tmax
    traj = integrate(prob, p, t0 + duration, args.dt, t0=t0)
    write_trajectory(out / "trajectory.csv", traj)
    write_events(out / "events.csv", traj)
    write_projection(out / "projection.csv", traj)
    write_json(out / "simulate.json", {
        "problem": prob.describe(), "p": p, "t0_normalized": t0,
        "t0_raw": prob.to_raw_time(t0), "t_end_raw": prob.to_raw_time(traj.t_end),
        "dt": traj.dt, "events": len(traj.events), "seed": args.seed,
        "grazing": [{"time_raw": prob.to_raw_time(g.time), "value": g.value} for g in traj.grazing],
    })
    print(f"simulate: {traj.values.size - traj.n_hist} samples, {len(traj.events)} qualified maxima "
          f"-> {out}")
    return EXIT_OK


def cmd_return_map(args) -> int:
    prob = _problem(args)
    n = 2000 if args.grid is None else args.grid
    if n < 2:
        raise ProblemError("--grid must be at least 2")
    out = _outdir(args)
    samples = return_map_grid(prob, n, dt=args.dt)
    header = ["p", "q", "lambda", "mu", "nu_star", "R", "Rprime", "branch_j", "u_shaped"]
    write_csv(out / "return_map.csv", header,
              ([s.as_row()[k] for k in header] for s in samples))
    write_json(out / "return_map.json", {
        "problem": prob.describe(), "grid": n, "time_coordinates": "normalized",
        "raw_time_shift": prob.shift, "seed": args.seed})
    jumps = sum(1 for a, b in zip(samples, samples[1:]) if a.branch_j != b.branch_j)
    print(f"return-map: {n} samples, {jumps} branch changes -> {out / 'return_map.csv'}")
    return EXIT_OK


def _try(func, *a, **kw):
    try:
        return func(*a, **kw), None
    except (ProblemError, ReturnMapError, ValueError) as exc:
        return None, str(exc)


def analyze(prob: NormalizedProblem, grid: int = 400, dt=None) -> dict:
    report = {"problem": prob.describe(), "time_coordinates": "normalized; *_raw = normalized + shift"}
    st = stability_check(prob.params)
    report["stability"] = {"stable": st.stable, "branch": st.branch}
    r0 = R_value(prob, 0.0, dt=dt)
    report["R0"] = r0
    report["R_R0"] = R_value(prob, r0, dt=dt)
    b1, err = _try(beta1, prob)
    report["beta1"] = None if b1 is None else {
        "normalized": b1, "raw": prob.to_raw_time(b1), "ftilde": float(prob.ftilde(b1))}
    if err:
        report["beta1_error"] = err
    if q0_applicable(prob):
        q0, err = _try(q0_root, prob)
        report["q0"] = None if q0 is None else {
            "normalized": q0, "raw": prob.to_raw_time(q0), "pc": float(prob.ftilde(q0))}
        if err:
            report["q0_error"] = err
    else:
        report["q0"] = "not applicable"
    roots, err = _try(V_roots, prob.params)
    report["V_roots"] = None if roots is None else {"alpha_star": roots[0], "beta_star": roots[1]}
    if err:
        report["V_roots_error"] = err
    report["discontinuities"] = [d.as_dict() for d in find_discontinuities(prob, n_grid=grid, dt=dt)]
    report["fixed_points"] = {
        str(n): [{"p": fp.p, "orbit": list(fp.orbit[:-1]), "multiplier": fp.multiplier}
                 for fp in fixed_points(prob, n, n_grid=grid, dt=dt)]
        for n in (1, 2)}
    return report


def cmd_analyze(args) -> int:
    prob = _problem(args)
    out = _outdir(args)
    report = analyze(prob, 400 if args.grid is None else args.grid, args.dt)
    report["seed"] = args.seed
    write_json(out / "analysis.json", report)
    fps = ", ".join(f"{fp['p']:.6g} (R'={fp['multiplier']:.4g})" if fp["multiplier"] is not None
                    else f"{fp['p']:.6g}" for fp in report["fixed_points"]["1"])
    print(f"analyze: R(0)={report['R0']:.6g}; discontinuities at "
          f"{[round(d['p_j'], 6) for d in report['discontinuities']]}; fixed points {fps}")
    return EXIT_OK


def cmd_certify(args) -> int:
    prob = _problem(args)
    out = _outdir(args)
    threshold = chaos.MARGIN_THRESHOLD if args.tol is None else args.tol
    try:
        cert = chaos.certify(prob, n_grid=chaos.GRID if args.grid is None else args.grid,
                             threshold=threshold, dt=args.dt)
    except chaos.CertificationError as exc:
        write_json(out / "certificate.json", {"valid": False, "reason": str(exc),
                                              "relation": exc.relation, "seed": args.seed})
        print(f"certify: refused: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    payload = cert.as_dict()
    payload["seed"] = args.seed
    write_json(out / "certificate.json", payload)
    iv = cert.intervals
    print(f"certify: I1=[{iv.p0:.6g}, {iv.alpha:.6g}] I2=[{iv.alpha:.6g}, {iv.kappa:.6g}] "
          f"I3=[{iv.p1:.6g}, {iv.R0:.6g}]")
    for c in cert.coverings:
        print(f"  {c.name}: image=[{c.image[0]:.6g}, {c.image[1]:.6g}] "
              f"free margin={c.free_margin:.4g} anchored={len(c.anchored)} ok={c.ok}")
    print(f"  adjacency={cert.adjacency.tolist()} transitive power={cert.transitive_power} "
          f"entropy >= {cert.entropy_lower:.12g}")
    for c in cert.census:
        print(f"  n={c['n']}: trace={c['trace']} fixed points={c['fixed_points']} "
              f"words realized={c['words_realized']}")
    return EXIT_OK if cert.valid else EXIT_VERIFY


def cmd_appendix_verify(args) -> int:
    out = _outdir(args)
    n = 2000 if args.grid is None else args.grid
    rep = closedform.verify_appendix_minima(n).as_dict()
    tol = 5e-4 if args.tol is None else args.tol
    rep["reference"] = APPENDIX_REFERENCE
    rep["within_reference"] = {k: abs(rep[k] - v) <= tol for k, v in APPENDIX_REFERENCE.items()}
    rep["signs_ok"] = rep["min_psi"] > 0 and rep["min_increment"] > 0 and rep["max_phi"] < 0
    write_json(out / "appendix.json", rep)
    for k, v in APPENDIX_REFERENCE.items():
        print(f"appendix: {k} = {rep[k]:.6g} (reference {v}, within {tol}: {rep['within_reference'][k]})")
    return EXIT_OK if rep["signs_ok"] else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "return-map": cmd_return_map,
    "analyze": cmd_analyze,
    "certify": cmd_certify,
    "appendix-verify": cmd_appendix_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxdde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--problem", help="problem definition JSON file")
        src.add_argument("--preset", choices=["ex1", "ex2"], help="built-in example (default ex2)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--grid", type=int, help="grid size for scans")
        sp.add_argument("--dt", type=float, help="integration step (snapped to h/N)")
        sp.add_argument("--tol", type=float, help="verification tolerance")
        sp.add_argument("--tmax", type=float, help="integration length for simulate")
        sp.add_argument("--p", type=float, help="initial constant history value")
        sp.add_argument("--seed", type=int, default=0, help="recorded for reproducibility")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        _positive("dt", args.dt)
        _positive("tol", args.tol)
        _positive("tmax", args.tmax)
        if args.grid is not None and args.grid < 2:
            raise ProblemError("--grid must be at least 2")
        return COMMANDS[args.command](args)
    except (ProblemError, ReturnMapError, ValueError, OSError) as exc:
        print(f"maxdde: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
