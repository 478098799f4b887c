"""Command-line front end.

    kinuq run --preset ex1b --out runs/ex1b
    kinuq run --model linear-consensus --solver fp --d2 0.1 --lambda 0.3 --out runs/free
    kinuq oracle consensus-fbar --q0 0.5 --lambda 0.5 --t 1 2 4
    kinuq compare runs/ex1b --tol 0.02

Exit codes: 0 success, 1 solver failure, 2 comparison failure,
3 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys

import numpy as np

from . import oracles
from .errors import ConfigError, KinUQError, MissingData
from .experiments import (
    PRESETS,
    build_config,
    compare_run,
    format_report,
    load_config_file,
    output_dirs,
    run_experiment,
    write_outputs,
)
from .model import MODEL_NAMES

EXIT_OK, EXIT_SOLVER, EXIT_COMPARE, EXIT_CONFIG = 0, 1, 2, 3


def _run_parser(sub):
    p = sub.add_parser("run", help="run a preset or a free-form experiment")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--config", help="flat YAML file of experiment keys")
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--solver", choices=("mc", "fp"))
    p.add_argument("--q0", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--d2", type=float, help="constant D^2")
    p.add_argument("--d0", type=float, help="amplitude of D(v) = d0 (1 - v^2)")
    p.add_argument("--p", type=float, help="inelasticity exponent")
    p.add_argument("--delta0", type=float)
    p.add_argument("--slope", type=float)
    p.add_argument("--theta-law", choices=("uniform", "normal"))
    p.add_argument("--particles", type=int)
    p.add_argument("--nodes", type=int, help="M; the rule has M+1 nodes")
    p.add_argument("--node-source", choices=("gauss", "random"))
    p.add_argument("--grid-points", type=int)
    p.add_argument("--domain", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float)
    p.add_argument("--record-dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--quad-order", choices=("SP2", "SP4", "SPG", "SPE"))
    p.add_argument("--initial", choices=("uniform", "dirac-shifted", "bimodal-h0"))
    p.add_argument("--snapshot-times", type=float, nargs="*")
    p.add_argument("--workers", type=int, default=1, help="processes for the node solves")
    p.add_argument("--out", required=True)
    return p


_RUN_KEYS = (
    "preset", "model", "solver", "q0", "lam", "gamma", "sigma2", "d2", "d0", "p", "delta0", "slope",
    "theta_law", "particles", "nodes", "node_source", "grid_points", "domain", "dt", "t_final",
    "record_dt", "seed", "quad_order", "initial", "snapshot_times",
)


def _oracle_parser(sub):
    p = sub.add_parser("oracle", help="evaluate a closed-form result as CSV rows")
    p.add_argument("name", choices=oracles.ORACLES)
    p.add_argument("--t", type=float, nargs="*", default=[1.0])
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--q0", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--var-theta", type=float, default=1.0 / 3.0)
    p.add_argument("--d2", type=float, default=0.1)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q-value", type=float, default=0.5)
    p.add_argument("--v", type=float, nargs="*", default=[0.0])
    p.add_argument("--energy", type=float, default=1.0)
    return p


def _emit(header, rows, out=None):
    out = out or sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["%.15g" % x if isinstance(x, float) else x for x in r])


def cmd_oracle(args):
    prm = oracles.ConsensusParams(args.q0, args.lam, args.var_theta)
    name = args.name
    if name == "kac-means":
        _emit(["t", "m_g", "m_f"], [(t, *oracles.kac_means(t, args.theta)) for t in args.t])
    elif name == "kac-bound":
        _emit(["t", "lower_bound", "m_fbar"],
              [(t, oracles.kac_mean_lower_bound(t), oracles.kac_mean_fbar(t)) for t in args.t])
    elif name == "consensus-energies":
        _emit(["t", "E_g", "E_f"], [(t, *oracles.consensus_energies(prm, t, args.theta)) for t in args.t])
    elif name == "consensus-fbar":
        prm = oracles.ConsensusParams(args.q0, args.lam)
        _emit(["t", "E_fbar"], [(t, oracles.consensus_energy_fbar_uniform(prm, t)) for t in args.t])
    elif name == "consensus-conditions":
        det, sto = oracles.consensus_conditions(prm)
        _emit(["q0", "lambda", "deterministic_ok", "stochastic_ok"], [(args.q0, args.lam, det, sto)])
    elif name == "normal-fbar":
        rows = []
        for t in args.t:
            val = oracles.normal_theta_energy_fbar(prm, t)
            rows.append((t, "blowup" if isinstance(val, oracles.BlowUp) else val))
        _emit(["t", "E_fbar"], rows)
    elif name == "inelastic-kac":
        st = oracles.inelastic_kac_steady(args.p, args.d2, args.theta)
        _emit(["theta", "E_g_inf", "E_f_inf", "E_fbar_inf"], [(args.theta, st.E_g_inf, st.E_f_inf, math.inf)])
    elif name == "const-diff":
        st = oracles.const_diff_steady(prm, args.d2, args.theta)
        _emit(["theta", "E_g_inf", "E_f_inf"], [(args.theta, st.E_g_inf, st.E_f_inf)])
    elif name == "const-diff-fbar":
        fb = oracles.const_diff_fbar_infty(oracles.ConsensusParams(args.q0, args.lam), args.d2)
        _emit(["v", "fbar_inf"], [(v, float(fb.density(v))) for v in args.v])
        _emit(["E_g_inf", "E_fbar_inf", "ratio"], [(fb.E_g_inf, fb.E_fbar_inf, fb.ratio)])
    elif name == "nonlinear-shape":
        _emit(["v", "shape"], [(v, oracles.nonlinear_diff_steady_shape(args.q_value, v)) for v in args.v])
    elif name == "w2":
        _emit(["second_moment", "W2"], [(args.energy, oracles.w2_to_dirac(args.energy))])
    return EXIT_OK


def cmd_run(args):
    try:
        file_values = load_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k) for k in _RUN_KEYS}
        if overrides["domain"] is not None:
            overrides["domain"] = list(overrides["domain"])
        if overrides["snapshot_times"] is not None:
            overrides["snapshot_times"] = list(overrides["snapshot_times"])
        cfg = build_config(file_values, overrides)
    except (ConfigError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = run_experiment(cfg, workers=args.workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KinUQError, ArithmeticError) as exc:
        node = getattr(exc, "node", None)
        where = f" (node {node})" if node is not None else ""
        print(f"solver failure{where}: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    for out_dir, (gamma, model, ens) in zip(output_dirs(args.out, cfg), results):
        rows = write_outputs(out_dir, cfg, model, ens, gamma)
        print(f"[{out_dir}]")
        sys.stdout.write(format_report(rows, ens))
    return EXIT_OK


def cmd_compare(args):
    try:
        rows = compare_run(args.run_dir, args.tol)
    except MissingData as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return EXIT_COMPARE
    except (ConfigError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(format_report(rows))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_COMPARE


def build_parser():
    parser = argparse.ArgumentParser(prog="kinuq", description="Uncertain kinetic models: MC, SP Fokker-Planck, collocation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _run_parser(sub)
    _oracle_parser(sub)
    p = sub.add_parser("compare", help="check a finished run against closed forms")
    p.add_argument("run_dir")
    p.add_argument("--tol", type=float, help="override every relative/absolute tolerance")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    np.seterr(over="ignore", under="ignore")
    if args.command == "run":
        return cmd_run(args)
    if args.command == "oracle":
        try:
            return cmd_oracle(args)
        except (ConfigError, ArithmeticError, ValueError) as exc:
            print(f"oracle error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return cmd_compare(args)


if __name__ == "__main__":
    sys.exit(main())
