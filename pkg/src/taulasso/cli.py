"""Command-line interface: ``taulasso {fit,cv,simulate,breakdown,overshrink,influence}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .exceptions import InvalidInputError, InvalidParameterError, InvalidSpecError, TauLassoError
from .rho import TuningPair

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
THREADS_ENV = "TAULASSO_THREADS"

log = logging.getLogger("taulasso")


class InputFileError(InvalidInputError):
    pass


def read_dataset(path):
    """Read a CSV with a header row, ``y`` first, then predictors."""
    from .solver import Dataset

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise InputFileError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[0] != "y":
            raise InputFileError(f"{path}: line 1: first column must be named 'y', got {header[0]!r}")
        if len(header) < 2:
            raise InputFileError(f"{path}: line 1: need at least one predictor column")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputFileError(f"{path}: line {line_no}: expected {len(header)} fields, found {len(row)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputFileError(
                        f"{path}: line {line_no}, column {col} ({header[col - 1]}): not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise InputFileError(f"{path}: line {line_no}, column {col} ({header[col - 1]}): non-finite value")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise InputFileError(f"{path}: no data rows")
    arr = np.array(rows)
    return Dataset(arr[:, 0], arr[:, 1:]), header[1:]


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(raw)
        except ValueError:
            raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidParameterError(f"thread count must be at least 1, got {n}")
    return n


def _tuning(args) -> TuningPair:
    return TuningPair(c0=args.c0, c1=args.c1, delta=args.delta)


def _emit(payload: dict, path: Optional[str]):
    text = json.dumps(payload, indent=2, default=_plain, ensure_ascii=False) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "output")}
    cfg["threads"] = _threads(args)
    cfg.update(extra)
    return cfg


# ---------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    from .pipeline import fit_estimator

    tuning = _tuning(args)
    data, names = read_dataset(args.input)
    if args.lam is None and not args.cv:
        raise InvalidParameterError("give --lambda or --cv")
    support = None
    if args.estimator == "oracle":
        if not args.support:
            raise InvalidParameterError("--estimator oracle needs --support")
        support = [names.index(s) if s in names else int(s) for s in args.support.split(",")]
    res = fit_estimator(
        data, args.estimator, args.pilot, tuning, gamma=args.gamma, epsilon_floor=args.epsilon_floor,
        lam=None if args.cv else args.lam, folds=args.folds, seed=args.seed, starts=args.starts, support=support,
        standardize_data=not args.no_standardize, n_jobs=_threads(args),
    )
    out = {
        "beta": res.beta,
        "intercept": res.intercept,
        "s": res.s,
        "tau": res.tau,
        "lambda": res.lam,
        "active_set": [int(j) for j in res.active_set],
        "active_names": [names[j] for j in res.active_set],
        "objective": res.objective,
        "trace_length": int(len(res.trace)),
        "converged": bool(res.converged),
        "seed": args.seed,
        "config": _config(args),
    }
    _emit(out, args.output)
    return EXIT_OK


def cmd_cv(args) -> int:
    from .preprocessing import standardize
    from .selection import make_lambda_grid, select_adaptive_tau_lasso, select_tau_lasso
    from .pilot import compute_pilot

    tuning = _tuning(args)
    data, _ = read_dataset(args.input)
    work = standardize(data)[0] if not args.no_standardize else data
    if args.estimator == "adaptive":
        pilot = compute_pilot(work, args.pilot, tuning, args.folds, args.seed)
        res = select_adaptive_tau_lasso(work, pilot, tuning, args.gamma, args.epsilon_floor, args.folds, args.seed,
                                        n_lambda=args.n_lambda, ratio=args.ratio, n_jobs=_threads(args))
    else:
        res = select_tau_lasso(work, tuning, args.folds, args.seed, n_lambda=args.n_lambda, ratio=args.ratio,
                               n_jobs=_threads(args))
    cv = res.cv
    out = {
        "lambda_grid": cv.lambda_grid,
        "cv_scores": [None if not np.isfinite(v) else float(v) for v in cv.cv_scores],
        "best_lambda": cv.best_lambda,
        "fold_assignments": cv.fold_assignments,
        "warnings": cv.warnings,
        "seed": args.seed,
        "config": _config(args),
    }
    _emit(out, args.output)
    return EXIT_OK


def _load_spec(args):
    from .simbench.scenarios import ContaminationPlan, ScenarioSpec, scenario

    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpecError(f"{args.spec}: {exc}") from None
        contamination = raw.pop("contamination", None)
        try:
            spec = ScenarioSpec(**raw)
        except TypeError as exc:
            raise InvalidSpecError(f"{args.spec}: {exc}") from None
        if contamination is not None:
            spec = spec.with_(contamination=ContaminationPlan(**contamination))
        elif args.contaminate:
            spec = spec.with_(contamination=ContaminationPlan(overlap=args.overlap))
        return spec.with_(error_law=args.error) if args.error else spec
    return scenario(args.scenario, args.error or "normal", args.contaminate, args.overlap)


def _partial_exit(n_failed, total, threshold) -> int:
    if total and n_failed / total > threshold:
        log.error("%d of %d trial fits failed (threshold %.2f)", n_failed, total, threshold)
        return EXIT_PARTIAL
    return EXIT_OK


def _write_report(report, prefix):
    if prefix:
        report.to_csv(prefix + ".csv")
        report.to_json(prefix + ".json")
    else:
        sys.stdout.write(report.to_json() + "\n")


def cmd_simulate(args) -> int:
    from .simbench import FULL_TRIALS, run_table_experiment

    spec = _load_spec(args)
    trials = FULL_TRIALS if args.full else args.trials
    report = run_table_experiment([spec], args.estimators.split(","), trials, args.seed, _threads(args))
    report.config["cli"] = _config(args, trials=trials)
    _write_report(report, args.output)
    total = trials * len(report.config["estimators"])
    return _partial_exit(sum(1 for t in report.trials if "error" in t), total, args.max_failed)


def cmd_breakdown(args) -> int:
    from .simbench import parse_ystar, run_breakdown_curve

    grid = parse_ystar(args.ystar)
    if np.any(grid <= 0):
        raise InvalidParameterError("--ystar values must be positive")
    report = run_breakdown_curve(grid, args.trials, args.seed, args.estimators.split(","), n_jobs=_threads(args))
    report.config["cli"] = _config(args)
    _write_report(report, args.output)
    return _partial_exit(sum(1 for t in report.trials if t["error"]), len(report.trials), args.max_failed)


def cmd_overshrink(args) -> int:
    from .simbench import run_overshrinkage

    report = run_overshrinkage(None, args.trials, args.seed, n_jobs=_threads(args))
    report.config["cli"] = _config(args)
    _write_report(report, args.output)
    return EXIT_OK


def cmd_influence(args) -> int:
    from .simbench import run_if_validation

    if not args.toy_1d:
        raise InvalidParameterError("only the one-predictor toy model is available; pass --toy-1d")
    cfg = {"lambda_scale": args.lambda_scale, "gamma": args.gamma, "engine": args.engine, "draws": args.draws,
           "n": args.n, "grid": (args.grid_lo, args.grid_hi, args.grid_step)}
    report = run_if_validation(cfg, args.seed)
    if args.output:
        report.to_csv(args.output)
    summary = {**report.summary(), "csv": args.output, "config": {**report.config, "cli": _config(args)}}
    _emit(summary, args.summary)
    if not report.bounded:
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_tuning(p):
    p.add_argument("--c0", type=float, default=TuningPair.c0, help="M-scale clipping constant")
    p.add_argument("--c1", type=float, default=TuningPair.c1, help="tau-scale clipping constant")
    p.add_argument("--delta", type=float, default=TuningPair.delta, help="M-scale right-hand side")
    p.add_argument("--gamma", type=float, default=1.0, help="adaptive weight exponent")
    p.add_argument("--epsilon-floor", type=float, default=None, help="floor for |pilot| in adaptive weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taulasso", description="Robust sparse regression with tau-Lasso.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help=f"worker cap (default ${THREADS_ENV} or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_cmd(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", required=True, help="CSV with header; first column y")
        p.add_argument("--output", help="JSON output path (stdout when omitted)")
        p.add_argument("--estimator", choices=("tau-lasso", "adaptive", "oracle"), default="adaptive")
        p.add_argument("--pilot", choices=("s-ridge", "tau-lasso"), default="s-ridge")
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-standardize", action="store_true")
        _add_tuning(p)
        p.set_defaults(func=func)
        return p

    p = data_cmd("fit", cmd_fit, "fit one estimator")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="penalty level")
    p.add_argument("--cv", action="store_true", help="choose penalties by cross-validation")
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--support", help="comma list of predictor names or indices (oracle)")

    p = data_cmd("cv", cmd_cv, "cross-validate the penalty")
    p.add_argument("--n-lambda", type=int, default=30)
    p.add_argument("--ratio", type=float, default=1e-3)

    def sim_common(p, seed_required):
        p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--output", help="output prefix for .csv and .json (stdout JSON when omitted)")
        p.add_argument("--max-failed", type=float, default=0.05, help="failed-fit fraction that triggers exit 4")

    p = sub.add_parser("simulate", help="scenario tables")
    sel = p.add_mutually_exclusive_group(required=True)
    sel.add_argument("--scenario", help="scenario1 ... scenario5")
    sel.add_argument("--spec", help="JSON scenario description")
    p.add_argument("--error", choices=("normal", "t3", "t1"), default=None)
    p.add_argument("--contaminate", action="store_true")
    p.add_argument("--overlap", choices=("independent", "disjoint", "coincident"), default="independent")
    p.add_argument("--estimators", default="adaptive,tau-lasso,oracle")
    p.add_argument("--full", action="store_true", help="500 trials")
    sim_common(p, True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("breakdown", help="RMSE against outlier magnitude")
    p.add_argument("--ystar", default="0.1:100:log20", help="lo:hi:logN, lo:hi:linN or a comma list")
    p.add_argument("--estimators", default="adaptive,tau-lasso")
    sim_common(p, False)
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("overshrink", help="coefficient bias paths")
    sim_common(p, False)
    p.set_defaults(func=cmd_overshrink)

    p = sub.add_parser("influence", help="influence function against sensitivity curve")
    p.add_argument("--toy-1d", action="store_true", help="one-predictor toy model")
    p.add_argument("--lambda-scale", type=float, default=0.1, help="penalty is lambda_scale / n")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--engine", choices=("sample", "model"), default="sample")
    p.add_argument("--draws", type=int, default=10**6)
    p.add_argument("--grid-lo", type=float, default=-10.0)
    p.add_argument("--grid-hi", type=float, default=10.0)
    p.add_argument("--grid-step", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", help="IF/SC grid CSV path")
    p.add_argument("--summary", help="JSON summary path (stdout when omitted)")
    p.set_defaults(func=cmd_influence)
    return parser


def _validate(args):
    """Check shared overrides before any computation."""
    if hasattr(args, "c0"):
        _tuning(args)
        if not args.gamma > 0:
            raise InvalidParameterError("--gamma must be positive")
        if args.epsilon_floor is not None and args.epsilon_floor < 0:
            raise InvalidParameterError("--epsilon-floor must be non-negative")
    if getattr(args, "folds", 2) < 2:
        raise InvalidParameterError("--folds must be at least 2")
    if getattr(args, "trials", 1) < 1:
        raise InvalidParameterError("--trials must be at least 1")
    _threads(args)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate(args)
        return args.func(args)
    except (InvalidInputError, InvalidParameterError, InvalidSpecError) as exc:
        sys.stderr.write(f"taulasso: error: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        sys.stderr.write(f"taulasso: error: {exc}\n")
        return EXIT_INPUT
    except TauLassoError as exc:
        sys.stderr.write(f"taulasso: numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
