"""Command-line entry point ``lab``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .evolution import PERTURBATIONS, stability_experiment
from .experiments import (
    RECIPES,
    ExperimentConfig,
    Table,
    admissible_tuples,
    atomic_write,
    load_config,
    run,
    table_csv,
)
from .ground_state import NoGroundStateError, SolverError, default_grid, petviashvili_single, solve
from .linearization import d_curve, linearize, low_spectrum
from .model import ModelParams
from .spectral_core import Grid, save_profile


def _add_model(ap: argparse.ArgumentParser, single: bool = True):
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--a", type=int, default=1)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--q", type=int, default=3)
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=None, help="grid points")
    ap.add_argument("--L", type=float, default=None, help="half box length")
    if single:
        ap.add_argument("--single", type=int, default=None, metavar="R",
                        help="use the single power u^R instead of (a, p, q)")


def _grid(args, power):
    if args.L is not None:
        return Grid(args.L, args.n or default_grid(args.sigma, args.c, power=power).n)
    if args.n is not None:
        return default_grid(args.sigma, args.c, n=args.n)
    return None


def _ground(args):
    if getattr(args, "single", None):
        g = _grid(args, args.single) or default_grid(args.sigma, args.c, power=args.single)
        return petviashvili_single(args.single, args.sigma, args.c, g)
    params = ModelParams(args.sigma, args.a, args.p, args.q, args.c)
    return solve(params, grid=_grid(args, args.q))


def cmd_groundstate(args):
    res = _ground(args)
    if args.out:
        save_profile(res.profile, args.out, **res.summary())
    print(json.dumps(res.summary(), indent=2, default=float))


def cmd_spectrum(args):
    res = _ground(args)
    rep = low_spectrum(linearize(res), m=args.m, metric=args.metric)
    out = {
        "eigenvalues": rep.eigenvalues.tolist(),
        "C1": rep.coercivity_constant,
        "negative_count": rep.negative_count,
        "kernel_alignment": rep.kernel_alignment,
        "method": rep.method,
    }
    if args.out:
        tab = Table(["index", "eigenvalue"], [[i, float(w)] for i, w in enumerate(rep.eigenvalues)])
        atomic_write(Path(args.out), table_csv(tab, "cli"))
    print(json.dumps(out, indent=2))


def cmd_dcurve(args):
    cs = np.geomspace(args.c_min, args.c_max, args.points)
    if args.single:
        dc = d_curve(cs, (args.single, args.sigma))
    else:
        dc = d_curve(cs, ModelParams(args.sigma, args.a, args.p, args.q))
    d2 = np.concatenate([[np.nan], dc.second_derivative, [np.nan]])
    tab = Table(["c", "d", "d2", "C1", "negative_count", "kernel_alignment"])
    for c, d, dd in zip(dc.c_values, dc.d_values, d2):
        if args.single:
            g = default_grid(args.sigma, c, power=args.single)
            gs = petviashvili_single(args.single, args.sigma, c, g)
        else:
            gs = solve(ModelParams(args.sigma, args.a, args.p, args.q, c))
        rep = low_spectrum(linearize(gs))
        tab.rows.append([c, d, dd, rep.coercivity_constant, rep.negative_count,
                         rep.kernel_alignment])
    text = table_csv(tab, "cli")
    if args.out:
        atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if dc.scaling_exponent is not None:
        print(f"# fitted exponent e = {dc.scaling_exponent:.8f}", file=sys.stderr)
    for flag in dc.flags:
        print(f"# {flag}", file=sys.stderr)


def cmd_evolve(args):
    res = _ground(args)
    tr = stability_experiment(res, args.perturb, args.delta, args.T, dt=args.dt,
                              stride=args.stride, seed=args.seed)
    tab = Table(["t", "dist", "y_star", "E_drift", "M_drift", "max_u"], [list(r) for r in tr.rows()])
    atomic_write(Path(args.trace), table_csv(tab, "cli"))
    print(json.dumps({"R": tr.ratio, "halted": tr.halted, "reason": tr.halt_reason,
                      "t_end": float(tr.times[-1]), **tr.meta}, indent=2, default=float))


def cmd_run(args):
    cfg = load_config(args.config)
    man = run(cfg, args.output)
    print(man.to_json())
    return 0 if man.passed else 1


def cmd_list(args):
    for name in RECIPES:
        print(name)


def cmd_tuples(args):
    rows = admissible_tuples(args.sigma, q_max=args.q_max)
    print("sigma,a,p,q,case,stability_hypothesis,note")
    for r in rows:
        print(f"{r.sigma:g},{r.a},{r.p},{r.q},{r.case},{r.stability_hypothesis},{r.note}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="fractional KdV ground states and stability")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("groundstate", help="solve for a ground state")
    _add_model(g)
    g.add_argument("--out", help="write the profile (x, value) with a JSON header")
    g.set_defaults(func=cmd_groundstate)

    s = sub.add_parser("spectrum", help="low spectrum of the linearized operator")
    _add_model(s)
    s.add_argument("--m", type=int, default=6)
    s.add_argument("--metric", choices=("L2", "H_half_sigma"), default="L2")
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("dcurve", help="d(c) along the ground-state branch")
    _add_model(d)
    d.add_argument("--c-min", type=float, default=0.5)
    d.add_argument("--c-max", type=float, default=2.0)
    d.add_argument("--points", type=int, default=5)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dcurve)

    e = sub.add_parser("evolve", help="perturb a ground state and track the orbital distance")
    _add_model(e)
    e.add_argument("--perturb", choices=PERTURBATIONS, default="rescale")
    e.add_argument("--delta", type=float, default=1e-2)
    e.add_argument("--T", type=float, default=10.0)
    e.add_argument("--dt", type=float, default=None)
    e.add_argument("--stride", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--trace", default="trace.csv")
    e.set_defaults(func=cmd_evolve)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output", default=None)
    r.set_defaults(func=cmd_run)

    sub.add_parser("list-recipes", help="list experiment recipes").set_defaults(func=cmd_list)

    t = sub.add_parser("tuples", help="admissible (p, q) tuples per sigma")
    t.add_argument("--sigma", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    t.add_argument("--q-max", type=int, default=9)
    t.set_defaults(func=cmd_tuples)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except (NoGroundStateError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
