"""Monte-Carlo experiment drivers with per-trial seeds and aggregated reports."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..exceptions import InvalidParameterError, TauLassoError
from ..pilot import compute_pilot
from ..pipeline import ESTIMATORS, fit_estimator
from ..preprocessing import destandardize_coefficients, standardize
from ..rho import TuningPair
from ..selection import make_lambda_grid
from ..solver import adaptive_design, fit_tau_path
from .metrics import METRICS, score
from .scenarios import OVERSHRINK, TOY_1D, BadLeveragePlan, ScenarioSpec, generate, scenario

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 100
FULL_TRIALS = 500


def trial_seeds(seed: int, stream: int, trials: int):
    """Independent per-trial seed sequences; trial t always gets the same stream."""
    return [np.random.SeedSequence(seed, spawn_key=(stream, t)) for t in range(trials)]


def _int_seed(ss) -> int:
    return int(ss.generate_state(1)[0])


def _map(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(x) for x in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(x) for x in items)


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(v.mean()), se


@dataclass
class ExperimentReport:
    """Aggregated rows plus per-trial records and the resolved configuration."""

    kind: str
    config: dict
    rows: List[dict]
    trials: List[dict] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(1 for t in self.trials if t.get("error"))

    def lookup(self, **match) -> List[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    def value(self, stat="mean", **match) -> float:
        rows = self.lookup(**match)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {match}")
        return rows[0][stat]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "config": self.config, "rows": self.rows, "n_failed": self.n_failed,
                "trials": self.trials}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2, default=_jsonable)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        if not self.rows:
            return
        keys = list(self.rows[0])
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, ScenarioSpec):
        return _spec_dict(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _spec_dict(spec: ScenarioSpec) -> dict:
    plan = spec.contamination
    return {
        "name": spec.name, "n": spec.n, "p": spec.p, "rho": spec.rho, "snr_db": spec.snr_db,
        "error_law": spec.error_law, "blocks": spec.blocks, "sigma": spec.sigma,
        "contamination": None if plan is None else {"type": type(plan).__name__, **plan.__dict__},
    }


# ---------------------------------------------------------------- tables


def _table_trial(args):
    spec, estimators, ss, leverage, fit_options = args
    train, test, _ = generate(spec, ss, leverage)
    seed = _int_seed(ss)
    out = {}
    for est in estimators:
        try:
            fit = fit_estimator(train, est, support=spec.support, seed=seed, **fit_options)
            out[est] = score(fit, spec.beta, test).as_dict()
        except (TauLassoError, np.linalg.LinAlgError) as exc:
            out[est] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def run_table_experiment(
    scenarios: Sequence,
    estimators: Sequence[str] = ESTIMATORS,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    n_jobs: int = 1,
    fit_options: Optional[dict] = None,
) -> ExperimentReport:
    """Prediction and selection metrics averaged over trials for each scenario.

    ``scenarios`` holds ScenarioSpec objects or scenario names. Leverage
    rows of a contamination plan are drawn once per scenario and kept
    fixed across trials; response outliers and clean data are redrawn per
    trial. Failed fits are excluded from the means and counted.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be at least 1")
    for e in estimators:
        if e not in ESTIMATORS:
            raise InvalidParameterError(f"unknown estimator {e!r}")
    fit_options = dict(fit_options or {})
    specs = [scenario(s) if isinstance(s, str) else s for s in scenarios]
    rows, records = [], []
    for i, spec in enumerate(specs):
        leverage = None
        if spec.contamination is not None:
            lev_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 2**20)))
            leverage = spec.contamination.draw_leverage(spec.n, spec.p, lev_rng)
        seeds = trial_seeds(seed, i, trials)
        results = _map(_table_trial, [(spec, tuple(estimators), ss, leverage, fit_options) for ss in seeds], n_jobs)
        contaminated = spec.contamination is not None
        for t, res in enumerate(results):
            for est, m in res.items():
                records.append({"scenario": spec.name, "error_law": spec.error_law, "contaminated": contaminated,
                                "trial": t, "estimator": est, **m})
        for est in estimators:
            ok = [r[est] for r in results if "error" not in r[est]]
            failed = len(results) - len(ok)
            for metric in METRICS:
                mean, se = _mean_se([m[metric] for m in ok])
                rows.append({"scenario": spec.name, "error_law": spec.error_law, "contaminated": contaminated,
                             "estimator": est, "metric": metric, "mean": mean, "se": se,
                             "n_ok": len(ok), "n_failed": failed})
    config = {"scenarios": [_spec_dict(s) for s in specs], "estimators": list(estimators), "trials": trials,
              "seed": seed, "fit_options": fit_options}
    return ExperimentReport("table", config, rows, records)


# ---------------------------------------------------------------- breakdown curve


def _curve_trial(args):
    spec, ystars, estimators, ss, fit_options = args
    seed = _int_seed(ss)
    out = []
    for ystar in ystars:
        train, test, _ = generate(spec.with_(contamination=BadLeveragePlan(float(ystar))), ss)
        for est in estimators:
            try:
                fit = fit_estimator(train, est, support=spec.support, seed=seed, **fit_options)
                out.append((ystar, est, score(fit, spec.beta, test).rmse, None))
            except (TauLassoError, np.linalg.LinAlgError) as exc:
                out.append((ystar, est, float("nan"), f"{type(exc).__name__}: {exc}"))
    return out


def parse_ystar(text: str) -> np.ndarray:
    """Parse ``lo:hi:logN`` / ``lo:hi:linN`` or a comma list into a grid."""
    try:
        if ":" in text:
            lo, hi, mode = text.split(":")
            kind, num = mode[:3], int(mode[3:])
            lo, hi = float(lo), float(hi)
            if num < 1:
                raise InvalidParameterError(f"grid size must be positive in {text!r}")
            if kind == "log":
                if lo <= 0 or hi <= 0:
                    raise InvalidParameterError(f"log spacing needs positive end points, got {text!r}")
                return np.geomspace(lo, hi, num)
            if kind == "lin":
                return np.linspace(lo, hi, num)
            raise InvalidParameterError(f"unknown spacing {kind!r} in {text!r}")
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"cannot parse grid {text!r}: {exc}") from None


def run_breakdown_curve(
    ystar_grid,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    estimators: Sequence[str] = ("adaptive", "tau-lasso"),
    base: Optional[ScenarioSpec] = None,
    n_jobs: int = 1,
    fit_options: Optional[dict] = None,
) -> ExperimentReport:
    """Test RMSE against outlier magnitude ``ystar``.

    The first 10% of training rows become ``y = 5 ystar``,
    ``x = [5, 0, ..., 0]``. Every magnitude reuses the same clean draws
    (trial t has one seed), so differences along the curve reflect the
    outliers only.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be at least 1")
    base = base or scenario("scenario1")
    ystars = [float(v) for v in np.asarray(ystar_grid, dtype=float).ravel()]
    fit_options = dict(fit_options or {})
    seeds = trial_seeds(seed, 0, trials)
    results = _map(_curve_trial, [(base, ystars, tuple(estimators), ss, fit_options) for ss in seeds], n_jobs)
    records, rows = [], []
    for t, res in enumerate(results):
        for ystar, est, rmse, err in res:
            records.append({"trial": t, "ystar": ystar, "estimator": est, "rmse": rmse, "error": err})
    for ystar in ystars:
        for est in estimators:
            vals = [r["rmse"] for r in records if r["ystar"] == ystar and r["estimator"] == est and not r["error"]]
            mean, se = _mean_se(vals)
            rows.append({"ystar": ystar, "estimator": est, "rmse_mean": mean, "rmse_se": se, "n_ok": len(vals),
                         "n_failed": trials - len(vals)})
    config = {"ystar": ystars, "trials": trials, "seed": seed, "estimators": list(estimators),
              "scenario": _spec_dict(base), "fit_options": fit_options}
    return ExperimentReport("breakdown", config, rows, records)


# ---------------------------------------------------------------- overshrinkage


def overshrink_grid(spec: ScenarioSpec = OVERSHRINK, seed: int = 0, n_lambda: int = 30, ratio: float = 1e-3,
                    tuning: TuningPair = TuningPair()) -> np.ndarray:
    """Decreasing penalty grid from the tau-Lasso ``lambda_max`` of a reference draw."""
    ref, _, _ = generate(spec, np.random.SeedSequence(seed, spawn_key=(2**21,)))
    std, _ = standardize(ref)
    return make_lambda_grid(std, tuning, n_lambda, ratio)


def _overshrink_trial(args):
    spec, grid, ss, tuning, folds = args
    train, _, _ = generate(spec, ss)
    std, mapping = standardize(train)
    pilot = compute_pilot(std, "s-ridge", tuning, folds, _int_seed(ss))
    tau = fit_tau_path(std, grid, tuning)
    weights, keep, scaled = adaptive_design(std, pilot)
    inner = fit_tau_path(scaled, grid, tuning)
    ada = np.zeros_like(tau)
    ada[:, keep] = inner / weights.w[keep]
    return destandardize_coefficients(tau, mapping), destandardize_coefficients(ada, mapping)


def run_overshrinkage(
    lambda_grid=None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    spec: ScenarioSpec = OVERSHRINK,
    tuning: TuningPair = TuningPair(),
    folds: int = 5,
    n_jobs: int = 1,
) -> ExperimentReport:
    """Bias paths ``mean(beta_hat_j - beta0_j)`` of both estimators over a penalty grid.

    The adaptive estimator uses a cross-validated S-Ridge pilot per trial;
    both estimators are fitted along the same grid on robustly
    standardized data.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be at least 1")
    grid = overshrink_grid(spec, seed, tuning=tuning) if lambda_grid is None else np.asarray(lambda_grid, float)
    seeds = trial_seeds(seed, 0, trials)
    results = _map(_overshrink_trial, [(spec, grid, ss, tuning, folds) for ss in seeds], n_jobs)
    paths = {"tau-lasso": np.array([r[0] for r in results]), "adaptive": np.array([r[1] for r in results])}
    rows = []
    for est, arr in paths.items():
        bias = arr - spec.beta  # (trials, n_lambda, p)
        for k, lam in enumerate(grid):
            for j in spec.support:
                vals = bias[:, k, j]
                vals = vals[np.isfinite(vals)]
                mean, se = _mean_se(vals)
                rows.append({"lambda": float(lam), "estimator": est, "coef": int(j), "beta0": float(spec.beta[j]),
                             "bias_mean": mean, "bias_se": se, "n_ok": int(vals.size)})
    config = {"lambda_grid": grid, "trials": trials, "seed": seed, "scenario": _spec_dict(spec), "folds": folds}
    return ExperimentReport("overshrink", config, rows)


# ---------------------------------------------------------------- influence


def run_if_validation(config: Optional[dict] = None, seed: int = 0):
    """IF against SC for the one-predictor toy model; returns an InfluenceReport.

    ``config`` keys: ``lambda_scale`` (penalty ``lambda_scale / n``, default
    0.1), ``gamma``, ``grid`` as ``(lo, hi, step)``, ``n``, ``engine``
    (``"sample"`` uses the data itself, ``"model"`` fresh draws) and
    ``draws`` for the model engine.
    """
    from ..influence import ExpectationEngine, influence_grid, toy_grid

    cfg = {"lambda_scale": 0.1, "gamma": 1.0, "grid": (-10.0, 10.0, 1.0), "n": TOY_1D.n, "engine": "sample",
           "draws": 10**6}
    cfg.update(config or {})
    spec = TOY_1D.with_(n=int(cfg["n"]))
    data, _, _ = generate(spec, np.random.SeedSequence(seed, spawn_key=(0,)))
    lam = cfg["lambda_scale"] / data.n
    engine = None
    if cfg["engine"] == "model":
        engine = ExpectationEngine.from_model(spec, cfg["draws"], np.random.SeedSequence(seed, spawn_key=(1,)))
    elif cfg["engine"] != "sample":
        raise InvalidParameterError(f"engine must be 'sample' or 'model', got {cfg['engine']!r}")
    grid = toy_grid(*cfg["grid"])
    cfg.update({"seed": seed, "lambda": lam, "beta0": list(spec.beta0)})
    return influence_grid(data, lam, grid, gamma=cfg["gamma"], engine=engine, config=cfg)
