"""Prequential evaluation harness and error reporting.

The forecast horizon is split into equal blocks. At each block
boundary every configured method is refitted on all observations seen
so far; inside a block, forecasts are produced one step ahead with the
origin rolling over the true observations and no refitting. The
adaptive combiners keep their weight state across block boundaries
(weights belong to the online stream, models are refreshed).

Per-series evaluation is independent: the pooled global models for all
blocks are fitted up front (they depend only on the dataset and the
config), after which series can be processed in any order or in
parallel with identical results.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from driftcast.combine import PairingEnsemble
from driftcast.core import ConfigError, Dataset, DriftcastError, FitError, format_float
from driftcast.learners import (
    DEFAULT_GLOBAL_LAGS,
    DEFAULT_RIDGE_LAMBDA,
    WINDOW_ALL,
    WINDOW_LAST_200,
    LearnerSpec,
    fit_ets,
    fit_global_ar,
    fit_local_ar,
    predict_one,
)
from driftcast.weighting import WeightingScheme

# method name -> (lag order or None for ets, window)
LOCAL_SPECS = {
    "AR3_200": (3, WINDOW_LAST_200),
    "AR3_All": (3, WINDOW_ALL),
    "AR5_200": (5, WINDOW_LAST_200),
    "AR5_All": (5, WINDOW_ALL),
    "ETS_200": (None, WINDOW_LAST_200),
    "ETS_All": (None, WINDOW_ALL),
}

# method name -> (weighting method, window)
GLOBAL_SPECS = {
    "Plain_200": ("none", WINDOW_LAST_200),
    "Plain_All": ("none", WINDOW_ALL),
    "EXP_200": ("exponential", WINDOW_LAST_200),
    "EXP_All": ("exponential", WINDOW_ALL),
    "Linear_200": ("linear", WINDOW_LAST_200),
    "Linear_All": ("linear", WINDOW_ALL),
}

COMBINER_RULES = {"ECW": "ecw", "GDW": "gdw"}

# pairing -> (partial sub-model, all sub-model)
PAIRING_SOURCES = {
    ("exponential", "exponential"): ("EXP_200", "EXP_All"),
    ("exponential", "linear"): ("EXP_200", "Linear_All"),
    ("linear", "exponential"): ("Linear_200", "EXP_All"),
    ("linear", "linear"): ("Linear_200", "Linear_All"),
}

# cheats by reading the next actual; only for harness sanity checks
ORACLE_METHOD = "Oracle"

METHOD_GROUPS = {
    "statistical": ("AR3_200", "AR3_All", "AR5_200", "AR5_All", "ETS_200", "ETS_All"),
    "gfm": ("EXP_200", "EXP_All", "Linear_200", "Linear_All", "Plain_200", "Plain_All"),
    "proposed": ("GDW", "ECW"),
}

METHOD_ORDER = METHOD_GROUPS["statistical"] + METHOD_GROUPS["gfm"] + METHOD_GROUPS["proposed"]

KNOWN_METHODS = set(LOCAL_SPECS) | set(GLOBAL_SPECS) | set(COMBINER_RULES) | {ORACLE_METHOD}


def method_group(name: str) -> str:
    for group, members in METHOD_GROUPS.items():
        if name in members:
            return group
    return "diagnostic"


@dataclass(frozen=True)
class MethodSpec:
    """One configured method; combiner flags are ignored by others."""

    name: str
    eta: float = 0.01
    true_gradient: bool = False
    clamp: bool = False

    def __post_init__(self) -> None:
        if self.name not in KNOWN_METHODS:
            raise ConfigError(f"unknown method {self.name!r}")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")


def default_method_specs() -> tuple:
    """The full benchmark matrix in report order."""
    return tuple(MethodSpec(name=name) for name in METHOD_ORDER)


@dataclass(frozen=True)
class EvalConfig:
    """Harness parameters plus shared learner hyperparameters."""

    horizon: int = 350
    block_size: int = 50
    methods: tuple = field(default_factory=default_method_specs)
    global_lags: int = DEFAULT_GLOBAL_LAGS
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
    alpha0: float = 0.9
    beta: float = 0.9
    literal_value_scaling: bool = False

    def __post_init__(self) -> None:
        if self.horizon < 1 or self.block_size < 1:
            raise ConfigError("horizon and block_size must be positive")
        if self.horizon % self.block_size != 0:
            raise ConfigError("horizon must be divisible by block_size")
        methods = tuple(self.methods)
        names = [m.name for m in methods]
        if not names or len(set(names)) != len(names):
            raise ConfigError("methods must be non-empty and unique")
        object.__setattr__(self, "methods", methods)
        if self.global_lags < 1:
            raise ConfigError("global_lags must be >= 1")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be nonnegative")

    @property
    def n_blocks(self) -> int:
        return self.horizon // self.block_size


@dataclass(frozen=True)
class ForecastTrace:
    """Predictions of one method on one series, aligned to the
    horizon's test positions."""

    series_id: str
    method: str
    predictions: np.ndarray


@dataclass
class RunResult:
    """Everything a prequential campaign produced for one dataset."""

    dataset_name: str
    series_ids: tuple
    methods: tuple
    train_len: int
    horizon: int
    block_size: int
    actuals: np.ndarray
    predictions: dict
    fit_counts: dict
    failures: dict
    weight_traces: Optional[dict] = None

    def traces(self) -> list:
        out = []
        for name in self.methods:
            for i, sid in enumerate(self.series_ids):
                out.append(ForecastTrace(series_id=sid, method=name, predictions=self.predictions[name][i]))
        return out


@dataclass(frozen=True)
class _HarnessContext:
    """Picklable bundle shipped to per-series workers."""

    train_len: int
    horizon: int
    block_size: int
    methods: tuple
    needed_globals: tuple
    global_models: tuple
    global_failures: tuple
    capture_weights: bool = False


def needed_global_models(methods: Sequence[MethodSpec]) -> tuple:
    """Global fits required by the configured methods (baselines plus
    the four weighted sub-models when a combiner is present)."""
    names = set()
    for m in methods:
        if m.name in GLOBAL_SPECS:
            names.add(m.name)
        elif m.name in COMBINER_RULES:
            for partial, full in PAIRING_SOURCES.values():
                names.add(partial)
                names.add(full)
    return tuple(sorted(names))


def _global_learner_spec(name: str, cfg: EvalConfig) -> LearnerSpec:
    weighting_method, window = GLOBAL_SPECS[name]
    return LearnerSpec(
        family="global_ar",
        p=cfg.global_lags,
        window=window,
        weighting=WeightingScheme(
            method=weighting_method,
            alpha0=cfg.alpha0,
            beta=cfg.beta,
            literal_value_scaling=cfg.literal_value_scaling,
        ),
        ridge_lambda=cfg.ridge_lambda,
    )


def _evaluate_series(values: np.ndarray, ctx: _HarnessContext) -> dict:
    """Run every configured method over one series' horizon."""
    horizon, block_size, train_len = ctx.horizon, ctx.block_size, ctx.train_len
    n_blocks = horizon // block_size
    preds = {m.name: np.full(horizon, np.nan) for m in ctx.methods}
    fit_counts = {m.name: 0 for m in ctx.methods}
    failed: dict[str, str] = {}
    local_models: dict[str, object] = {}
    ensembles: dict[str, PairingEnsemble] = {}
    weight_log = (
        {m.name: [] for m in ctx.methods if m.name in COMBINER_RULES} if ctx.capture_weights else None
    )
    for m in ctx.methods:
        if m.name in COMBINER_RULES:
            ensembles[m.name] = PairingEnsemble(
                rule=COMBINER_RULES[m.name],
                eta=m.eta,
                true_gradient=m.true_gradient,
                clamp=m.clamp,
            )

    for b in range(n_blocks):
        fit_through = train_len + b * block_size
        block_globals = ctx.global_models[b]
        block_global_failures = ctx.global_failures[b]
        for m in ctx.methods:
            name = m.name
            if name in failed:
                continue
            if name in LOCAL_SPECS:
                p, window = LOCAL_SPECS[name]
                try:
                    if p is None:
                        local_models[name] = fit_ets(values[:fit_through], window)
                    else:
                        local_models[name] = fit_local_ar(values[:fit_through], p, window)
                    fit_counts[name] += 1
                except FitError as exc:
                    failed[name] = str(exc)
            elif name in GLOBAL_SPECS:
                if name in block_global_failures:
                    failed[name] = block_global_failures[name]
                else:
                    fit_counts[name] += 1
            elif name in COMBINER_RULES:
                broken = [
                    sub
                    for pair in PAIRING_SOURCES.values()
                    for sub in pair
                    if sub in block_global_failures
                ]
                if broken:
                    failed[name] = f"sub-model fit failed: {sorted(set(broken))}"
                else:
                    fit_counts[name] += 1
            else:  # oracle needs no fit
                fit_counts[name] += 1

        for k in range(block_size):
            t = fit_through + k
            pos = b * block_size + k
            history = values[:t]
            global_preds = {
                gname: predict_one(block_globals[gname], history)
                for gname in ctx.needed_globals
                if gname in block_globals
            }
            for m in ctx.methods:
                name = m.name
                if name in failed:
                    continue
                if name in LOCAL_SPECS:
                    preds[name][pos] = predict_one(local_models[name], history)
                elif name in GLOBAL_SPECS:
                    preds[name][pos] = global_preds[name]
                elif name in COMBINER_RULES:
                    sub = {
                        pairing: (global_preds[partial], global_preds[full])
                        for pairing, (partial, full) in PAIRING_SOURCES.items()
                    }
                    try:
                        preds[name][pos] = ensembles[name].step(sub)
                    except DriftcastError as exc:
                        # the squared-error weight update can blow up on
                        # extreme data; report like a fit failure
                        failed[name] = f"combiner diverged at t={t + 1}: {exc}"
                        preds[name][:] = np.nan
                else:
                    preds[name][pos] = values[t]
            actual = values[t]
            for name, ensemble in ensembles.items():
                if name not in failed:
                    if weight_log is not None:
                        row = {
                            pairing: (
                                ensemble.states[pairing].prev_pred_partial,
                                ensemble.states[pairing].prev_pred_all,
                                ensemble.states[pairing].w_p,
                                ensemble.states[pairing].w_a,
                                ensemble.states[pairing].prev_pred_combined,
                            )
                            for pairing in ensemble.pairings
                        }
                        weight_log[name].append((t + 1, actual, row))
                    ensemble.observe(actual)

    return {"preds": preds, "fit_counts": fit_counts, "failed": failed, "weights": weight_log}


def _evaluate_batch(args):
    ctx, batch = args
    return [(ordinal, _evaluate_series(values, ctx)) for ordinal, values in batch]


def prequential_run(
    dataset: Dataset,
    cfg: EvalConfig,
    n_workers: int = 1,
    capture_weights: bool = False,
) -> RunResult:
    """Run the full campaign over one dataset.

    Results are independent of ``n_workers``; any fit failure marks the
    (series, method) pair as failed and is surfaced in the result
    rather than silently skipped. ``capture_weights`` additionally
    records the combiners' per-step weight trajectories.
    """
    if dataset.train_len + cfg.horizon > dataset.series_length:
        raise ConfigError(
            f"series of length {dataset.series_length} cannot host train_len "
            f"{dataset.train_len} plus horizon {cfg.horizon}"
        )
    needed = needed_global_models(cfg.methods)
    global_models = []
    global_failures = []
    for b in range(cfg.n_blocks):
        fit_through = dataset.train_len + b * cfg.block_size
        models: dict[str, object] = {}
        failures: dict[str, str] = {}
        for name in needed:
            try:
                models[name] = fit_global_ar(dataset, fit_through, _global_learner_spec(name, cfg))
            except FitError as exc:
                failures[name] = str(exc)
        global_models.append(models)
        global_failures.append(failures)

    ctx = _HarnessContext(
        train_len=dataset.train_len,
        horizon=cfg.horizon,
        block_size=cfg.block_size,
        methods=cfg.methods,
        needed_globals=needed,
        global_models=tuple(global_models),
        global_failures=tuple(global_failures),
        capture_weights=capture_weights,
    )
    tasks = [(i, s.values) for i, s in enumerate(dataset.series)]
    results: list = [None] * len(tasks)
    if n_workers <= 1:
        for ordinal, values in tasks:
            results[ordinal] = _evaluate_series(values, ctx)
    else:
        chunk_count = min(len(tasks), n_workers * 4)
        chunks = [(ctx, tasks[i::chunk_count]) for i in range(chunk_count)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for chunk_result in pool.map(_evaluate_batch, chunks):
                for ordinal, result in chunk_result:
                    results[ordinal] = result

    method_names = tuple(m.name for m in cfg.methods)
    n = len(dataset.series)
    predictions = {name: np.vstack([results[i]["preds"][name] for i in range(n)]) for name in method_names}
    fit_counts = {
        name: np.array([results[i]["fit_counts"][name] for i in range(n)]) for name in method_names
    }
    failures: dict[str, dict] = {name: {} for name in method_names}
    for i, s in enumerate(dataset.series):
        for name, message in results[i]["failed"].items():
            failures[name][s.id] = message
    actuals = np.vstack(
        [s.values[dataset.train_len : dataset.train_len + cfg.horizon] for s in dataset.series]
    )
    weight_traces = None
    if capture_weights:
        weight_traces = {
            name: {dataset.series[i].id: results[i]["weights"][name] for i in range(n)}
            for name in method_names
            if name in COMBINER_RULES
        }
    return RunResult(
        dataset_name=dataset.name,
        series_ids=tuple(s.id for s in dataset.series),
        methods=method_names,
        train_len=dataset.train_len,
        horizon=cfg.horizon,
        block_size=cfg.block_size,
        actuals=actuals,
        predictions=predictions,
        fit_counts=fit_counts,
        failures=failures,
        weight_traces=weight_traces,
    )


def rmse(actuals: Sequence[float], forecasts: Sequence[float]) -> float:
    """Root mean squared error over a horizon."""
    a, f = _metric_inputs(actuals, forecasts)
    return float(np.sqrt(np.mean((f - a) ** 2)))


def mae(actuals: Sequence[float], forecasts: Sequence[float]) -> float:
    """Mean absolute error over a horizon."""
    a, f = _metric_inputs(actuals, forecasts)
    return float(np.mean(np.abs(f - a)))


def _metric_inputs(actuals, forecasts):
    a = np.asarray(actuals, dtype=np.float64)
    f = np.asarray(forecasts, dtype=np.float64)
    if a.shape != f.shape or a.ndim != 1 or a.size == 0:
        raise ConfigError("actuals and forecasts must be equal-length non-empty vectors")
    return a, f


def aggregate(values: Sequence[float]) -> dict:
    """Mean and median of per-series metric values."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ConfigError("nothing to aggregate")
    return {"mean": float(np.mean(arr)), "median": float(np.median(arr))}


@dataclass
class EvalReport:
    """Per-series errors plus dataset-level aggregates per method.

    Failed (series, method) pairs hold NaN and are excluded from the
    aggregates; their counts travel in ``failure_counts``.
    """

    dataset_name: str
    methods: tuple
    series_ids: tuple
    rmse_per_series: dict
    mae_per_series: dict
    summary: dict
    failure_counts: dict


def build_report(run: RunResult) -> EvalReport:
    """Score a campaign: RMSE/MAE per series, mean/median per method."""
    rmse_ps: dict[str, np.ndarray] = {}
    mae_ps: dict[str, np.ndarray] = {}
    summary: dict[str, dict] = {}
    failure_counts: dict[str, int] = {}
    failed_ids = {name: set(run.failures.get(name, {})) for name in run.methods}
    for name in run.methods:
        r = np.full(len(run.series_ids), np.nan)
        m = np.full(len(run.series_ids), np.nan)
        for i, sid in enumerate(run.series_ids):
            if sid in failed_ids[name]:
                continue
            r[i] = rmse(run.actuals[i], run.predictions[name][i])
            m[i] = mae(run.actuals[i], run.predictions[name][i])
        rmse_ps[name] = r
        mae_ps[name] = m
        ok = np.isfinite(r)
        failure_counts[name] = int(np.sum(~ok))
        if not np.any(ok):
            summary[name] = {
                "mean_rmse": float("nan"),
                "median_rmse": float("nan"),
                "mean_mae": float("nan"),
                "median_mae": float("nan"),
            }
        else:
            summary[name] = {
                "mean_rmse": aggregate(r[ok])["mean"],
                "median_rmse": aggregate(r[ok])["median"],
                "mean_mae": aggregate(m[ok])["mean"],
                "median_mae": aggregate(m[ok])["median"],
            }
    return EvalReport(
        dataset_name=run.dataset_name,
        methods=run.methods,
        series_ids=run.series_ids,
        rmse_per_series=rmse_ps,
        mae_per_series=mae_ps,
        summary=summary,
        failure_counts=failure_counts,
    )


@dataclass
class SensitivityTable:
    """Mean metric per drift-parameter bucket per method."""

    dataset_name: str
    parameter: str
    metric: str
    edges: np.ndarray
    counts: np.ndarray
    means: dict
    methods: tuple


def _drift_parameter(dataset: Dataset) -> tuple[str, np.ndarray]:
    kinds = {s.drift.kind for s in dataset.series}
    if kinds == {"sudden"}:
        return "t_drift", np.array([s.drift.t_drift for s in dataset.series], dtype=np.float64)
    if kinds == {"incremental"}:
        return "drift_length", np.array(
            [s.drift.t_end - s.drift.t_start for s in dataset.series], dtype=np.float64
        )
    raise ConfigError(f"no drift parameter for drift kinds {sorted(kinds)}")


def drift_sensitivity(dataset: Dataset, report: EvalReport, metric: str = "rmse", n_buckets: int = 10) -> SensitivityTable:
    """Bucket series by drift point (sudden) or drift length
    (incremental) and average the chosen metric per bucket."""
    parameter, values = _drift_parameter(dataset)
    per_series = report.rmse_per_series if metric == "rmse" else report.mae_per_series
    if metric not in ("rmse", "mae"):
        raise ConfigError("metric must be 'rmse' or 'mae'")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        edges = np.array([lo, hi])
        idx = np.zeros(len(values), dtype=int)
        n_buckets = 1
    else:
        edges = np.linspace(lo, hi, n_buckets + 1)
        idx = np.minimum(((values - lo) / (hi - lo) * n_buckets).astype(int), n_buckets - 1)
    counts = np.bincount(idx, minlength=n_buckets)
    means = {}
    for name in report.methods:
        vals = per_series[name]
        bucket_means = np.full(n_buckets, np.nan)
        for bucket in range(n_buckets):
            mask = (idx == bucket) & np.isfinite(vals)
            if np.any(mask):
                bucket_means[bucket] = float(np.mean(vals[mask]))
        means[name] = bucket_means
    return SensitivityTable(
        dataset_name=dataset.name,
        parameter=parameter,
        metric=metric,
        edges=edges,
        counts=counts,
        means=means,
        methods=report.methods,
    )


def drift_region_split(dataset: Dataset, report: EvalReport, metric: str = "rmse") -> dict:
    """Per-method mean metric for series whose sudden drift lands in
    the test region vs the first half of training, plus the excess."""
    parameter, values = _drift_parameter(dataset)
    if parameter != "t_drift":
        raise ConfigError("drift-region split needs a sudden-drift dataset")
    per_series = report.rmse_per_series if metric == "rmse" else report.mae_per_series
    train_len = dataset.train_len
    early = values <= train_len / 2.0
    test = values > train_len
    if not np.any(early) or not np.any(test):
        raise ConfigError("dataset lacks series in one of the drift regions")
    out = {}
    for name in report.methods:
        vals = per_series[name]
        early_mean = float(np.mean(vals[early & np.isfinite(vals)]))
        test_mean = float(np.mean(vals[test & np.isfinite(vals)]))
        out[name] = {
            "early_train": early_mean,
            "test_region": test_mean,
            "excess": test_mean - early_mean,
        }
    return out


def write_traces(path: str | Path, run: RunResult) -> Path:
    """Forecast trace CSV: ``series_id,method,t,actual,prediction``
    with t the 1-based series position."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series_id", "method", "t", "actual", "prediction"])
        for name in run.methods:
            for i, sid in enumerate(run.series_ids):
                row_preds = run.predictions[name][i]
                for k in range(run.horizon):
                    writer.writerow(
                        [
                            sid,
                            name,
                            run.train_len + k + 1,
                            format_float(run.actuals[i][k]),
                            format_float(row_preds[k]),
                        ]
                    )
    return path


def load_traces(path: str | Path) -> RunResult:
    """Rebuild a RunResult (minus fit counts) from a trace CSV."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"trace file missing: {path}")
    rows_by_key: dict[tuple, list] = {}
    methods: list[str] = []
    series_ids: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["series_id", "method", "t", "actual", "prediction"]:
            raise ConfigError(f"unexpected trace header {header!r} in {path}")
        for sid, name, t, actual, prediction in reader:
            if name not in methods:
                methods.append(name)
            if sid not in series_ids:
                series_ids.append(sid)
            rows_by_key.setdefault((name, sid), []).append((int(t), float(actual), float(prediction)))
    if not rows_by_key:
        raise ConfigError(f"trace file {path} holds no rows")
    horizons = {len(v) for v in rows_by_key.values()}
    if len(horizons) != 1:
        raise ConfigError("inconsistent horizon lengths across traces")
    horizon = horizons.pop()
    first = rows_by_key[(methods[0], series_ids[0])]
    train_len = first[0][0] - 1
    predictions = {name: np.full((len(series_ids), horizon), np.nan) for name in methods}
    actuals = np.full((len(series_ids), horizon), np.nan)
    failures: dict[str, dict] = {name: {} for name in methods}
    for (name, sid), rows in rows_by_key.items():
        i = series_ids.index(sid)
        rows.sort(key=lambda r: r[0])
        predictions[name][i] = [r[2] for r in rows]
        actuals[i] = [r[1] for r in rows]
        if not np.all(np.isfinite(predictions[name][i])):
            failures[name][sid] = "missing predictions in stored trace"
    return RunResult(
        dataset_name=path.stem,
        series_ids=tuple(series_ids),
        methods=tuple(methods),
        train_len=train_len,
        horizon=horizon,
        block_size=horizon,
        actuals=actuals,
        predictions=predictions,
        fit_counts={name: np.zeros(len(series_ids), dtype=int) for name in methods},
        failures=failures,
    )
