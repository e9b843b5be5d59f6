"""
Command-line front end.

Subcommands::

    sqfilter check         --config cfg.json --out DIR    validation report (JSON)
    sqfilter simulate      --config cfg.json --out DIR    trajectory and summary CSVs
    sqfilter lambda-curve  --out DIR                      phase curves (CSV)
    sqfilter config-dump   [--config cfg.json]            canonical config on stdout

Exit status: 0 success, 1 validation failure, 2 configuration error,
3 runtime or step failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
import warnings

import numpy as np

from .config import RunConfig, default_config, dump_config, load_config
from .errors import ConfigError, DegeneratePhaseError, NearMaximalWarning, SqfilterError, StepFailure, ValidationError

log = logging.getLogger("sqfilter")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULT_TAUS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

SUMMARY_FILE = "summary.csv"
REPORT_FILE = "validation_report.json"
CURVE_FILE = "lambda_curve.csv"


def fmt(x) -> str:
    """Round-trip float formatting (17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _write_csv(path: str, header: list[str], rows) -> None:
    # newline="" plus an explicit terminator keeps output byte-identical across platforms
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _echo(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    return cfg.with_overrides(seed=args.seed, trajectories=args.trajectories)


def _out_dir(args, cfg: RunConfig | None) -> str:
    out = args.out or (cfg.output.directory if cfg else ".")
    os.makedirs(out, exist_ok=True)
    return out


def resolve_transfer(cfg: RunConfig):
    """Transfer coefficients for the configured representation and phase."""
    from .quadrature import transfer_for

    b = cfg.bath.representation()
    return b, transfer_for(b, cfg.lam, fallback=0.0)


def _split_observables(obs: dict) -> list[tuple[str, bool]]:
    """Column plan: Hermitian observables give one real column, others re/im."""
    out = []
    for name, mat in obs.items():
        out.append((name, bool(np.allclose(mat, mat.conj().T, atol=1e-12))))
    return out


def _estimate_columns(plan, prefix=""):
    cols = []
    for name, herm in plan:
        cols += [f"{prefix}{name}"] if herm else [f"{prefix}{name}_re", f"{prefix}{name}_im"]
    return cols


def _estimate_values(plan, values):
    row = []
    for q, (_, herm) in enumerate(plan):
        v = values[q]
        row += [fmt(v.real)] if herm else [fmt(v.real), fmt(v.imag)]
    return row


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    from .filtering import run_kushner_ensemble, run_zakai_ensemble
    from .system import master_equation_path

    cfg = _load(args)
    mdl = cfg.model()
    _, tc = resolve_transfer(cfg)
    run = cfg.run
    obs = cfg.observables()
    rho0 = cfg.initial_state()
    plan = _split_observables(obs)
    t0 = time.perf_counter()
    try:
        if run.filter == "kushner":
            ens = run_kushner_ensemble(mdl, tc, rho0, run.T, run.dt, run.seed, obs, run.trajectories,
                                       run.stride, run.scheme, workers=run.workers)
        else:
            ens = run_zakai_ensemble(mdl, tc, rho0, run.T, run.dt, run.seed, obs, run.trajectories,
                                     run.stride, workers=run.workers)
    except StepFailure as exc:
        print(f"error: step failure in trajectory {exc.trajectory} at t={exc.time:.6g}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    elapsed = time.perf_counter() - t0

    out = _out_dir(args, cfg)
    ref = master_equation_path(mdl, rho0, ens.times, dt=min(run.dt, 1e-3))
    mean, se = ens.mean(), ens.stderr()
    header = ["t"]
    for name, herm in plan:
        parts = [name] if herm else [f"{name}_re", f"{name}_im"]
        for p in parts:
            header += [f"mean_{p}", f"stderr_{p}", f"reference_{p}"]
    rows = []
    for r, t in enumerate(ens.times):
        row = [fmt(t)]
        for q, (name, herm) in enumerate(plan):
            refv = np.trace(ref[r] @ obs[name])
            if herm:
                row += [fmt(mean[r, q].real), fmt(se[r, q]), fmt(refv.real)]
            else:
                row += [fmt(mean[r, q].real), fmt(se[r, q]), fmt(refv.real),
                        fmt(mean[r, q].imag), fmt(se[r, q]), fmt(refv.imag)]
        rows.append(row)
    _write_csv(os.path.join(out, SUMMARY_FILE), header, rows)

    n_files = min(cfg.output.max_trajectory_files, ens.n_trajectories)
    if n_files:
        tdir = os.path.join(out, "trajectories")
        os.makedirs(tdir, exist_ok=True)
        width = max(5, len(str(ens.n_trajectories - 1)))
        stride = run.stride
        for i in range(n_files):
            # dY column: record increment over the interval ending at t
            dy = np.concatenate([[0.0], ens.dY[i].reshape(-1, stride).sum(axis=1)]) if ens.dY.shape[1] else np.zeros(1)
            rows = [[fmt(t), fmt(dy[r])] + _estimate_values(plan, ens.estimates[i, r]) for r, t in enumerate(ens.times)]
            header = ["t", "dY"] + _estimate_columns(plan)
            if ens.normalization is not None:
                header.append("norm")
                rows = [row + [fmt(ens.normalization[i, r])] for r, row in enumerate(rows)]
            _write_csv(os.path.join(tdir, f"traj_{i:0{width}d}.csv"), header, rows)
    _echo(args, f"simulated {ens.n_trajectories} {run.filter} trajectories in {elapsed:.2f}s; wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check

def run_checks(cfg: RunConfig, quick: bool = False):
    """Run the validation suite for one configuration; returns (checks, arbitration, warnings)."""
    from . import validation as V

    mdl = cfg.model()
    run = cfg.run
    caught = []
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always", NearMaximalWarning)
        b, tc = resolve_transfer(cfg)
    caught += [str(w.message) for w in rec]

    n_draws = 200 if quick else 1000
    checks = V.coefficient_checks(mdl.bath, tc, n_draws)
    checks.append(V.generator_consistency(mdl, tc))
    p = mdl.bath
    checks.append(V.CheckResult.upper(
        "model:moment_oracle", V.moment_oracle_residual(b), 1e-10 * (1 + p.n),
        moments=V.gaussian_moment_oracle(b).as_tuple(),
    ))
    if abs(p.m) == 0:
        th = V.thermal_limit_check(p.n, mdl.L)
        checks.append(V.CheckResult.upper(
            "model:thermal_limit", max(th.alpha_deviation, th.gamma_deviation, th.tilde_L_deviation), th.tol,
            alpha=th.alpha, gamma=th.gamma, n=p.n,
        ))
    if p.n == 0 and abs(p.m) == 0:
        vc = V.vacuum_limit_check(mdl, dt=run.dt, T=run.T, seed=run.seed)
        checks.append(V.CheckResult(
            "model:vacuum_limit", vc.deviation, vc.threshold, vc.passed,
            {"deviation_half_dt": vc.deviation_half, "order": vc.order},
        ))

    rho0 = cfg.initial_state()
    at = [t for t in (0.25 * run.T, 0.5 * run.T, run.T) if abs(round(t / run.dt) * run.dt - t) < 1e-12 * max(1, run.T)]
    arbitration: dict = {}
    M = max(run.trajectories, 1000)
    for name, X in cfg.observables().items():
        ub = V.unbiasedness_test(mdl, M, run.T, run.dt, X, tc, run.seed, rho0, at, run.scheme, run.workers)
        checks.append(ub.check("ensemble:kushner_unbiased:" + name))
        zk = V.zakai_mean_test(mdl, M, run.T, run.dt, X, tc, run.seed + 1, rho0, at, run.workers)
        checks.append(zk.check("ensemble:zakai_mean:" + name))
    from .filtering import run_kushner_ensemble

    ens = run_kushner_ensemble(mdl, tc, rho0, run.T, run.dt, run.seed, {"id": np.eye(mdl.d)}, M,
                               int(round(run.T / run.dt)), run.scheme, workers=run.workers)
    st = V.innovation_statistics(ens)
    checks.append(V.CheckResult("ensemble:innovation_statistics", abs(st.mean), st.mean_bound, st.passed,
                                {"mean": st.mean, "variance": st.variance, "variance_bound": st.variance_bound,
                                 "samples": st.n_samples}))
    ks = V.kallianpur_striebel_check(mdl, tc, rho0, run.T, run.dt, run.seed, n_paths=5 if quick else 20)
    checks.append(V.CheckResult.upper("ensemble:kallianpur_striebel_normalized", ks.normalized_deviation, 1e-10,
                                      euler_deviation=ks.euler_deviation,
                                      euler_deviation_half_dt=ks.euler_deviation_half))
    probe = V.probe_state(mdl.L)
    if probe is not None:
        arbitration["innovations"] = V.arbitrate_innovations(mdl, tc, probe, run.T, run.dt, M, run.seed + 2, run.workers)
        checks.append(V.innovation_arbitration_check(arbitration["innovations"]))
    else:
        arbitration["innovations"] = "not applicable: L + L* = 0"
    vf = next(c for c in checks if c.name == "arbitration:variance_factor")
    arbitration["variance_factor"] = vf.detail["verdict"]
    gc = next(c for c in checks if c.name == "generator:ito_consistency")
    arbitration["generator_squeezing_sign"] = gc.detail["sign_verdict"]
    cf = next(c for c in checks if c.name == "model:alpha_gamma_moment_form")
    arbitration["alpha_gamma_closed_form"] = "moment_form" if cf.passed else "transfer_matrix_only"
    return checks, arbitration, caught


def cmd_check(args) -> int:
    from .validation import build_report

    cfg = _load(args)
    t0 = time.perf_counter()
    try:
        checks, arbitration, caught = run_checks(cfg, quick=args.quick)
    except StepFailure as exc:
        print(f"error: step failure in trajectory {exc.trajectory} at t={exc.time}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for msg in caught:
        print(f"warning: {msg}", file=sys.stderr)
    report = build_report(checks, arbitration, {"warnings": caught, "config": json.loads(dump_config(cfg))})
    out = _out_dir(args, cfg)
    path = os.path.join(out, REPORT_FILE)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    for c in checks:
        _echo(args, f"{'PASS' if c.passed else 'FAIL'}  {c.name}  residual={c.residual:.3g}  threshold={c.threshold:.3g}")
    _echo(args, f"report: {path} ({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# lambda-curve

def curve_rows(taus, n_theta: int):
    from .quadrature import phase_curve

    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta)
    header = ["tau", "theta", "rho", "lambda_formula", "lambda_derived", "difference", "degenerate", "rho_capped"]
    rows = []
    for p in phase_curve(taus, thetas):
        rows.append([fmt(p.tau), fmt(p.theta), fmt(p.rho), fmt(p.lam_formula), fmt(p.lam_derived),
                     fmt(p.difference), int(p.degenerate), int(p.rho_capped)])
    return header, rows


def cmd_lambda_curve(args) -> int:
    taus = args.taus or list(DEFAULT_TAUS)
    if any(not 0.5 <= t <= 1.0 for t in taus):
        print("error: tau values must lie in [0.5, 1]", file=sys.stderr)
        return EXIT_CONFIG
    if args.n_theta < 2:
        print("error: --n-theta must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    header, rows = curve_rows(taus, args.n_theta)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, CURVE_FILE)
        _write_csv(path, header, rows)
        _echo(args, f"wrote {len(rows)} rows to {path}")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_config_dump(args) -> int:
    cfg = _load(args)
    text = dump_config(cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "config.json"), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration (default: built-in demo)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: output.directory)")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--trajectories", type=int, help="override run.trajectories")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    parser = argparse.ArgumentParser(prog="sqfilter", description="Quantum filtering with squeezed input noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", parents=[common], help="run the validation suite and write a JSON report")
    p.add_argument("--quick", action="store_true", help="smaller coefficient sweeps")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("simulate", parents=[common], help="simulate trajectories and write CSVs")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("lambda-curve", parents=[common], help="phase curves for the BV family")
    p.add_argument("--taus", type=float, nargs="+", help=f"tau values (default {' '.join(map(str, DEFAULT_TAUS))})")
    p.add_argument("--n-theta", type=int, default=73, help="theta grid points on [0, 2 pi] (default 73)")
    p.set_defaults(func=cmd_lambda_curve)
    p = sub.add_parser("config-dump", parents=[common], help="print the canonical configuration")
    p.set_defaults(func=cmd_config_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.trajectories is not None and args.trajectories < 1:
        print("error: --trajectories must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, DegeneratePhaseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SqfilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
