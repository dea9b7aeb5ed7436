"""Command-line interface: one-shot estimates and the experiment studies.

Subcommands: trace, spin, projection, adaptive. Settings can come from an
INI config file (sections [problem], [function], [run], [estimator.LABEL]);
command-line flags override file values. Exit codes: 0 success, 2 usage
errors, 3 numeric/domain errors.
"""

import argparse
import configparser
import sys

import numpy as np

from .errors import KtraceError
from .estimators import EstimatorConfig
from .experiments import (ExperimentConfig, default_spin_estimators,
                          resolve_function, resolve_problem, run_adaptive_experiment,
                          run_estimator, run_projection_experiment,
                          run_spin_experiment, write_csv, RESULT_COLUMNS)

SUPPORTED_FUNCTIONS = "exp_neg_beta[:beta|:grid=lo,hi,count], log, sqrt, inverse, poly:c0,c1,..."


def _parse_kv(text):
    out = {}
    for item in text.split(","):
        if not item:
            continue
        if "=" in item:
            key, val = item.split("=", 1)
            out[key.strip()] = val.strip()
        else:
            out.setdefault("_positional", []).append(item.strip())
    return out


def parse_problem_spec(text):
    kind, _, rest = text.partition(":")
    kv = _parse_kv(rest)
    positional = kv.pop("_positional", [])
    if kind in ("spin_chain", "spin"):
        return {"kind": "spin_chain", "N": int(kv.get("N", 10)),
                "h": float(kv.get("h", 0.0))}
    if kind == "synthetic":
        variant = positional[0] if positional else kv.get("variant", "slow")
        spec = {"kind": "synthetic", "variant": variant,
                "d": int(kv.get("d", 2000)), "kappa": float(kv.get("kappa", 1000))}
        if "rho" in kv:
            spec["rho"] = float(kv["rho"])
        if "f" in kv:
            spec["f"] = kv["f"]
        return spec
    if kind == "power_diag":
        return {"kind": "power_diag", "d": int(kv.get("d", 2500)),
                "c": float(kv.get("c", 1.5))}
    if kind in ("matrix_market", "mm"):
        path = kv.get("path") or (positional[0] if positional else rest)
        if not path:
            raise ValueError("matrix_market problem needs a path")
        return {"kind": "matrix_market", "path": path}
    raise ValueError(f"unknown problem kind {kind!r}")


def parse_function_spec(text):
    kind, _, rest = text.partition(":")
    if kind == "exp_neg_beta":
        if rest.startswith("grid="):
            lo, hi, count = rest[len("grid="):].split(",")
            return {"kind": "exp_neg_beta", "beta_min": float(lo),
                    "beta_max": float(hi), "beta_count": int(count)}
        if rest:
            return {"kind": "exp_neg_beta", "beta": float(rest)}
        return {"kind": "exp_neg_beta"}
    if kind in ("log", "sqrt", "inverse"):
        return {"kind": kind}
    if kind == "poly":
        return {"kind": "poly", "coeffs": [float(c) for c in rest.split(",")]}
    raise ValueError(f"unknown function {kind!r}; supported: {SUPPORTED_FUNCTIONS}")


def _load_ini(path):
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    return parser


def _estimators_from_ini(ini):
    configs = []
    for section in ini.sections():
        if not section.startswith("estimator"):
            continue
        label = section.partition(".")[2] or section
        sec = ini[section]
        algorithm = sec.get("algorithm", "krylov")
        cfg = EstimatorConfig(
            block_size=sec.getint("b", 0),
            ortho_depth=sec.getint("q", 0),
            samples=sec.getint("m", 0),
            quad_degree=sec.getint("n", 1),
            restarts=sec.getint("r", 0),
            distribution=sec.get("dist", "gaussian"),
        )
        configs.append((label, algorithm, cfg))
    return configs


def _merged(args, ini, section, key, cast, fallback):
    """Flag value if given, else INI value, else fallback."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if ini is not None and ini.has_option(section, key):
        return cast(ini.get(section, key))
    return fallback


def cmd_trace(args):
    problem = resolve_problem(parse_problem_spec(args.problem))
    fn_spec = parse_function_spec(args.f)
    resolved = resolve_function(fn_spec)
    if isinstance(resolved, tuple):
        family, betas = resolved
    else:
        family, betas = resolved, None

    cfg = EstimatorConfig(
        block_size=args.b, ortho_depth=args.q, samples=args.m,
        quad_degree=args.n, restarts=args.r, distribution=args.dist,
        seed=args.seed, eps=args.eps, delta=args.delta,
        max_depth=args.qmax)
    est = run_estimator(args.alg, problem, family, cfg)

    if betas is None:
        print(f"total = {est.total:.16e}")
        print(f"t_defl = {est.t_defl:.16e}")
        print(f"t_rem = {est.t_rem:.16e}")
    else:
        for i, beta in enumerate(betas):
            print(f"beta = {beta:.6g}  total = {est.total[i]:.16e}  "
                  f"t_defl = {est.t_defl[i]:.16e}  t_rem = {est.t_rem[i]:.16e}")
    print(f"matvecs = {est.matvecs_used}")
    print(f"deflation_rank = {est.deflation_rank}")
    print(f"samples = {est.samples_used}")
    if est.warning:
        print(f"warning: {est.warning}", file=sys.stderr)

    if args.csv:
        rows = []
        echo = (f"alg={args.alg};b={cfg.block_size};q={cfg.ortho_depth};"
                f"m={cfg.samples};n={cfg.quad_degree}")
        totals = est.total if betas is not None else [est.total]
        grid = betas if betas is not None else [None]
        for i, beta in enumerate(grid):
            rows.append({"experiment": "trace", "config": echo, "trial": 0,
                         "beta": beta, "estimate": float(np.asarray(totals)[i]),
                         "exact": None, "rel_error": None,
                         "matvecs": est.matvecs_used,
                         "matvecs_deflation": est.matvecs_used
                         - est.samples_used * cfg.quad_degree,
                         "deflation_rank": est.deflation_rank,
                         "samples": est.samples_used, "wall_ms": None})
        write_csv(args.csv, RESULT_COLUMNS, rows)
    return 0


def cmd_spin(args):
    ini = _load_ini(args.config) if args.config else None
    problem = {"kind": "spin_chain",
               "N": _merged(args, ini, "problem", "N", int, 10),
               "h": _merged(args, ini, "problem", "h", float, 0.3)}
    function = {"kind": "exp_neg_beta",
                "beta_min": _merged(args, ini, "function", "beta_min", float, 1e-3),
                "beta_max": _merged(args, ini, "function", "beta_max", float, 1e3),
                "beta_count": _merged(args, ini, "function", "beta_count", int, 40)}
    estimators = _estimators_from_ini(ini) if ini else []
    cfg = ExperimentConfig(
        problem=problem, function=function,
        estimators=estimators or default_spin_estimators(),
        trials=_merged(args, ini, "run", "trials", int, 100),
        seed=_merged(args, ini, "run", "seed", int, 0),
        output=_merged(args, ini, "run", "output", str, "spin.csv"),
        workers=args.workers)
    rows = run_spin_experiment(cfg)
    print(f"wrote {len(rows)} rows to {cfg.output}")
    return 0


def cmd_projection(args):
    spectra = tuple(args.spectrum.split(",")) if args.spectrum else ("slow", "fast")
    cfg = ExperimentConfig(
        problem={"kind": "synthetic", "d": args.d, "kappa": args.kappa,
                 "rho": args.rho},
        spectra=spectra,
        q_grid=tuple(int(q) for q in args.q_grid.split(",")),
        b_grid=tuple(int(b) for b in args.b_grid.split(",")),
        restart_values=tuple(int(r) for r in args.restarts.split(",")),
        seed=args.seed, output=args.out)
    rows = run_projection_experiment(cfg)
    print(f"wrote {len(rows)} rows to {cfg.output}")
    return 0


def cmd_adaptive(args):
    problem = parse_problem_spec(args.problem)
    function = parse_function_spec(args.f)
    base = EstimatorConfig(block_size=args.b, quad_degree=args.n)
    cfg = ExperimentConfig(
        problem=problem, function=function,
        estimators=[("adaptive", "adaptive", base)],
        trials=args.trials, seed=args.seed, delta=args.delta,
        p_values=tuple(range(args.p_min, args.p_max + 1)),
        output=args.out)
    rows = run_adaptive_experiment(cfg)
    print(f"wrote {len(rows)} rows to {cfg.output}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ktrace",
        description="Stochastic trace estimation for symmetric matrix "
                    "functions via Krylov-aware deflation.")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("trace", help="single estimate")
    tr.add_argument("--problem", required=True,
                    help="spin_chain:N=10,h=0.3 | synthetic:slow,d=2000,kappa=1000"
                         " | power_diag:d=2500,c=1.5 | matrix_market:PATH")
    tr.add_argument("--f", required=True,
                    help=f"spectral function: {SUPPORTED_FUNCTIONS}")
    tr.add_argument("--alg", default="krylov",
                    choices=["krylov", "girard", "hutchpp", "restart",
                             "adaptive", "a-hutchpp"])
    tr.add_argument("--b", type=int, default=0)
    tr.add_argument("--q", type=int, default=0)
    tr.add_argument("--m", type=int, default=0)
    tr.add_argument("--n", type=int, default=50)
    tr.add_argument("--r", type=int, default=0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--dist", default="gaussian",
                    choices=["gaussian", "rademacher"])
    tr.add_argument("--eps", type=float, default=None)
    tr.add_argument("--delta", type=float, default=None)
    tr.add_argument("--qmax", type=int, default=None)
    tr.add_argument("--csv", default=None)
    tr.set_defaults(func=cmd_trace)

    sp = sub.add_parser("spin", help="partition-function error sweep")
    sp.add_argument("--config", default=None, help="INI config file")
    sp.add_argument("--N", type=int, default=None)
    sp.add_argument("--h", type=float, default=None)
    sp.add_argument("--beta-min", dest="beta_min", type=float, default=None)
    sp.add_argument("--beta-max", dest="beta_max", type=float, default=None)
    sp.add_argument("--beta-count", dest="beta_count", type=int, default=None)
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--output", default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_spin)

    pj = sub.add_parser("projection", help="projection-quality grid")
    pj.add_argument("--spectrum", default=None, help="slow,fast")
    pj.add_argument("--d", type=int, default=2000)
    pj.add_argument("--kappa", type=float, default=1000.0)
    pj.add_argument("--rho", type=float, default=0.95)
    pj.add_argument("--q-grid", dest="q_grid", default="2,8,32,128")
    pj.add_argument("--b-grid", dest="b_grid", default="1,4,16")
    pj.add_argument("--restarts", default="0")
    pj.add_argument("--seed", type=int, default=0)
    pj.add_argument("--out", default="projection.csv")
    pj.set_defaults(func=cmd_projection)

    ad = sub.add_parser("adaptive", help="adaptive-estimator comparison")
    ad.add_argument("--problem", default="power_diag:d=2500,c=1.5")
    ad.add_argument("--f", default="sqrt")
    ad.add_argument("--p-min", dest="p_min", type=int, default=2)
    ad.add_argument("--p-max", dest="p_max", type=int, default=7)
    ad.add_argument("--delta", type=float, default=0.05)
    ad.add_argument("--trials", type=int, default=10)
    ad.add_argument("--b", type=int, default=2)
    ad.add_argument("--n", type=int, default=50)
    ad.add_argument("--seed", type=int, default=0)
    ad.add_argument("--out", default="adaptive.csv")
    ad.set_defaults(func=cmd_adaptive)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        parser.error(str(exc))  # exits with code 2
    except KtraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
