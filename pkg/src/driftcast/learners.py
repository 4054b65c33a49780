"""Base forecasting models for the evaluation harness.

Three families, each trainable on the full history or the most recent
200 observations:

* ``global_ar``: one pooled autoregressive ridge model fitted across
  every series of a dataset (the built-in stand-in for a gradient
  boosted global learner; any model exposing the same fit/predict
  surface can replace it),
* ``local_ar``: per-series AR(p) by ordinary least squares,
* ``ets``: per-series simple exponential smoothing (level only) with
  the smoothing constant grid-searched on in-sample one-step error.

Recency weighting (see :mod:`driftcast.weighting`) enters the global
learner as per-row loss weights; local benchmarks are unweighted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from driftcast.core import ConfigError, Dataset, FitError
from driftcast.weighting import WeightingScheme, weight_schedule

WINDOW_LAST_200 = "last_200"
WINDOW_ALL = "all"
PARTIAL_WINDOW = 200

DEFAULT_GLOBAL_LAGS = 10
DEFAULT_RIDGE_LAMBDA = 1e-3

ETS_ALPHA_GRID = np.arange(1, 100) / 100.0


def resolve_window(window: str, available: int) -> int:
    """Concrete training-window length for a window spec."""
    if window == WINDOW_ALL:
        return available
    if window == WINDOW_LAST_200:
        return min(PARTIAL_WINDOW, available)
    raise ConfigError(f"unknown window {window!r}")


@dataclass(frozen=True)
class LearnerSpec:
    """What to fit: model family, lag order, window, and weighting."""

    family: str
    p: int = 1
    window: str = WINDOW_ALL
    weighting: WeightingScheme = field(default_factory=WeightingScheme)
    ridge_lambda: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in ("global_ar", "local_ar", "ets"):
            raise ConfigError(f"unknown learner family {self.family!r}")
        if self.p < 1:
            raise ConfigError("lag order must be >= 1")
        if self.window not in (WINDOW_LAST_200, WINDOW_ALL):
            raise ConfigError(f"unknown window {self.window!r}")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be nonnegative")


@dataclass(frozen=True)
class ForecastModel:
    """A fitted model. AR families carry ``coef``/``intercept``; ets
    carries ``level``/``smoothing``. ``fitted_through`` is the number
    of series observations seen at fit time."""

    spec: LearnerSpec
    fitted_through: int
    coef: Optional[np.ndarray] = None
    intercept: Optional[float] = None
    level: Optional[float] = None
    smoothing: Optional[float] = None

    def to_dict(self) -> dict:
        """JSON-ready parameter snapshot for reproducibility audits."""
        return {
            "family": self.spec.family,
            "p": self.spec.p,
            "window": self.spec.window,
            "weighting": self.spec.weighting.method,
            "ridge_lambda": self.spec.ridge_lambda,
            "fitted_through": self.fitted_through,
            "coef": None if self.coef is None else [float(c) for c in self.coef],
            "intercept": self.intercept,
            "level": self.level,
            "smoothing": self.smoothing,
        }


def _lag_rows(values: np.ndarray, p: int, first_target: int, last_target: int):
    """Design rows for targets in [first_target, last_target) of
    ``values``; column k holds lag k+1."""
    targets = np.arange(first_target, last_target)
    y = values[targets]
    X = np.empty((targets.size, p))
    for k in range(1, p + 1):
        X[:, k - 1] = values[targets - k]
    return X, y


def _solve_weighted_ridge(X: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float) -> np.ndarray:
    """Minimize sum_i w_i (y_i - b.x_i - c)^2 + lam*|b|^2, intercept c
    unpenalized. Returns [b..., c]."""
    n, p = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    wX = Xa * w[:, None]
    A = Xa.T @ wX
    b = wX.T @ y
    A[np.arange(p), np.arange(p)] += lam
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"singular weighted system: {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise FitError("weighted solve produced non-finite coefficients")
    return beta


def fit_global_ar(dataset: Dataset, train_through: int, spec: LearnerSpec) -> ForecastModel:
    """Pooled weighted autoregressive ridge fit across all series.

    Uses observations 1..train_through of every series. With a
    ``last_200`` window only rows whose target falls in the final 200
    training positions enter the pooled system; lags may reach further
    back. Row weights follow the configured weighting schedule per
    series, oldest row lowest. Deterministic: series are accumulated
    in dataset order.
    """
    p = spec.p
    if train_through < p + 1:
        raise FitError(f"need at least {p + 1} observations, have {train_through}")
    if train_through > dataset.series_length:
        raise FitError("train_through exceeds series length")
    d = p + 1
    A = np.zeros((d, d))
    rhs = np.zeros(d)
    for s in dataset.series:
        values = s.values[:train_through]
        window_len = resolve_window(spec.window, train_through)
        if spec.weighting.literal_value_scaling:
            # Eq-style value scaling: the window's observations are
            # multiplied by their weights and rows are built inside the
            # scaled window with unit loss weights.
            start = train_through - window_len
            scaled = values[start:] * weight_schedule(spec.weighting, window_len)
            X, y = _lag_rows(scaled, p, p, window_len)
            w = np.ones(len(y))
        else:
            first_target = max(p, train_through - window_len)
            X, y = _lag_rows(values, p, first_target, train_through)
            w = weight_schedule(spec.weighting, len(y))
        if len(y) == 0:
            raise FitError(f"series {s.id!r} contributes no rows")
        Xa = np.hstack([X, np.ones((len(y), 1))])
        wX = Xa * w[:, None]
        A += Xa.T @ wX
        rhs += wX.T @ y
    A[np.arange(p), np.arange(p)] += spec.ridge_lambda
    try:
        beta = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"singular pooled system: {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise FitError("pooled solve produced non-finite coefficients")
    return ForecastModel(
        spec=spec,
        fitted_through=train_through,
        coef=beta[:p],
        intercept=float(beta[p]),
    )


def fit_local_ar(values: Sequence[float], p: int, window: str = WINDOW_ALL) -> ForecastModel:
    """Per-series AR(p) with intercept, unweighted least squares on the
    resolved window. Rank-deficient but consistent systems (constant
    series) resolve to the minimum-norm solution."""
    values = np.asarray(values, dtype=np.float64)
    window_len = resolve_window(window, len(values))
    if window_len < 2 * p + 2:
        raise FitError(f"window of {window_len} too short for AR({p})")
    segment = values[len(values) - window_len :]
    X, y = _lag_rows(segment, p, p, window_len)
    Xa = np.hstack([X, np.ones((len(y), 1))])
    beta, *_ = np.linalg.lstsq(Xa, y, rcond=None)
    if not np.all(np.isfinite(beta)):
        raise FitError("least squares produced non-finite coefficients")
    spec = LearnerSpec(family="local_ar", p=p, window=window)
    return ForecastModel(spec=spec, fitted_through=len(values), coef=beta[:p], intercept=float(beta[p]))


def fit_ets(values: Sequence[float], window: str = WINDOW_ALL) -> ForecastModel:
    """Simple exponential smoothing with the level seeded at the first
    window observation and the smoothing constant chosen from
    {0.01, ..., 0.99} by in-sample one-step squared error."""
    values = np.asarray(values, dtype=np.float64)
    window_len = resolve_window(window, len(values))
    if window_len < 3:
        raise FitError("ets needs a window of at least 3 observations")
    segment = values[len(values) - window_len :]
    alphas = ETS_ALPHA_GRID
    level = np.full(alphas.size, segment[0])
    sse = np.zeros(alphas.size)
    for y in segment[1:]:
        sse += (y - level) ** 2
        level = alphas * y + (1.0 - alphas) * level
    best = int(np.argmin(sse))
    spec = LearnerSpec(family="ets", window=window)
    return ForecastModel(
        spec=spec,
        fitted_through=len(values),
        level=float(level[best]),
        smoothing=float(alphas[best]),
    )


def predict_one(model: ForecastModel, history: Sequence[float]) -> float:
    """One-step-ahead forecast given all observations so far.

    AR families read their lags off the end of ``history``; ets rolls
    its level forward through any observations that arrived after the
    fit (the smoothing constant stays fixed). Pure: the model is never
    mutated.
    """
    history = np.asarray(history, dtype=np.float64)
    if model.spec.family in ("global_ar", "local_ar"):
        p = model.spec.p
        if len(history) < p:
            raise ConfigError(f"need at least {p} observations of history")
        return float(model.intercept + model.coef @ history[-1 : -p - 1 : -1])
    if len(history) < model.fitted_through:
        raise ConfigError("history is shorter than the data the model was fitted on")
    level = model.level
    alpha = model.smoothing
    for y in history[model.fitted_through :]:
        level = alpha * y + (1.0 - alpha) * level
    return float(level)
