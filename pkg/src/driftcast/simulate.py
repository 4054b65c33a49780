"""Synthetic drifting-series generation.

Each simulated series splices two stationary AR trajectories: an
instant switch (sudden), a linear cross-fade over a window
(incremental), or per-index Bernoulli selection with linearly rising
switch probability (gradual). Drift locations are drawn per series
and may land in the training or test region.

The two trajectories come from the same kind of generator but with
two different coefficient vectors (``ar_coeffs`` before the drift,
``ar_coeffs_2`` after), so the switch is a real change of dynamics
that forecasting models can fail to track; setting both vectors equal
reduces the drift to a pure trajectory splice. The defaults have
nearly equal stationary variance, so the drift changes the dependence
structure rather than the scale.

Everything is deterministic given the config: series ordinal ``i``
gets seed ``base_seed + i``, from which the component trajectories,
drift parameters, and gradual selection stream are derived as
independent sub-streams.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from driftcast.core import (
    ConfigError,
    Dataset,
    DriftMeta,
    TimeSeries,
    derive_series_seed,
    require_finite,
    spawned_seed,
)

# sub-stream ids hung off each per-series seed
_STREAM_TS1 = 0
_STREAM_TS2 = 1
_STREAM_TS2_INIT = 2
_STREAM_DRIFT_PARAMS = 3
_STREAM_GRADUAL = 4
_STREAM_MEAN2 = 5

SIM_DRIFT_KINDS = ("sudden", "incremental", "gradual")

DEFAULT_AR_COEFFS = (0.5, -0.3, 0.2)
DEFAULT_AR_COEFFS_2 = (-0.3, 0.15, 0.05)


def check_stationary(coeffs: Sequence[float]) -> None:
    """Reject AR coefficients whose characteristic roots touch the unit
    circle (the generated process would not be stationary)."""
    coeffs = require_finite(coeffs, "ar_coeffs")
    if coeffs.size == 0:
        raise ConfigError("ar_coeffs must be non-empty")
    # roots of 1 - phi_1 z - ... - phi_p z^p, highest degree first
    poly = np.concatenate([-coeffs[::-1], [1.0]])
    roots = np.roots(poly)
    if roots.size and np.any(np.abs(roots) <= 1.0 + 1e-9):
        raise ConfigError(f"AR coefficients {coeffs.tolist()} are not stationary")


@dataclass(frozen=True)
class SimConfig:
    """Configuration for one simulated dataset (one drift kind)."""

    drift_kind: str
    n_series: int = 2000
    series_length: int = 2000
    train_len: int = 1650
    ar_coeffs: tuple = DEFAULT_AR_COEFFS
    ar_coeffs_2: tuple = DEFAULT_AR_COEFFS_2
    mean: float = 0.0
    mean_2: float = 0.0
    mean_2_high: Optional[float] = None
    noise_sd: float = 1.0
    burn_in: int = 200
    base_seed: int = 20250101

    def __post_init__(self) -> None:
        if self.drift_kind not in SIM_DRIFT_KINDS:
            raise ConfigError(f"drift_kind must be one of {SIM_DRIFT_KINDS}")
        if self.n_series < 1:
            raise ConfigError("n_series must be positive")
        if self.series_length < 20:
            raise ConfigError("series_length too short for drift placement")
        if not 1 <= self.train_len < self.series_length:
            raise ConfigError("need 1 <= train_len < series_length")
        object.__setattr__(self, "ar_coeffs", tuple(float(c) for c in self.ar_coeffs))
        object.__setattr__(self, "ar_coeffs_2", tuple(float(c) for c in self.ar_coeffs_2))
        check_stationary(self.ar_coeffs)
        check_stationary(self.ar_coeffs_2)
        if len(self.ar_coeffs_2) != len(self.ar_coeffs):
            raise ConfigError("ar_coeffs and ar_coeffs_2 must share the AR order")
        if not self.noise_sd > 0:
            raise ConfigError("noise_sd must be positive")
        if not (math.isfinite(self.mean) and math.isfinite(self.mean_2)):
            raise ConfigError("process means must be finite")
        if self.mean_2_high is not None and not self.mean_2_high >= self.mean_2:
            raise ConfigError("mean_2_high must be >= mean_2")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be nonnegative")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must fit in 64 bits")


@dataclass(frozen=True)
class ArProcess:
    """An AR(p) recursion around ``mean``:
    x_t = mean + sum_k phi_k (x_{t-k} - mean) + N(0, noise_sd^2).

    ``initial`` supplies the p values preceding the first generated
    point, oldest first.
    """

    coeffs: tuple
    noise_sd: float
    initial: tuple
    seed: int
    mean: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if len(self.initial) != len(self.coeffs):
            raise ConfigError("need exactly one initial value per AR coefficient")
        if not self.noise_sd > 0:
            raise ConfigError("noise_sd must be positive")
        if not math.isfinite(self.mean):
            raise ConfigError("mean must be finite")


def gen_ar(proc: ArProcess, n: int, burn_in: int = 0) -> np.ndarray:
    """Simulate ``n`` values of the process after discarding ``burn_in``."""
    check_stationary(proc.coeffs)
    if n < 1 or burn_in < 0:
        raise ConfigError("need n >= 1 and burn_in >= 0")
    rng = np.random.default_rng(proc.seed)
    eps = rng.normal(0.0, proc.noise_sd, size=burn_in + n)
    phi = proc.coeffs
    p = len(phi)
    mu = proc.mean
    xs = [v - mu for v in proc.initial]
    for e in eps.tolist():
        x = e
        for k in range(p):
            x += phi[k] * xs[-1 - k]
        xs.append(x)
    out = np.asarray(xs[p + burn_in :])
    if mu != 0.0:
        out += mu
    return out


def combine_sudden(ts1: np.ndarray, ts2: np.ndarray, t_drift: int) -> np.ndarray:
    """ts1 strictly before 1-based index ``t_drift``, ts2 from it on."""
    ts1, ts2 = _paired(ts1, ts2)
    if not 1 <= t_drift <= len(ts1):
        raise ConfigError(f"t_drift={t_drift} outside [1, {len(ts1)}]")
    out = ts1.copy()
    out[t_drift - 1 :] = ts2[t_drift - 1 :]
    return out


def combine_incremental(ts1: np.ndarray, ts2: np.ndarray, t_start: int, t_end: int) -> np.ndarray:
    """Linear cross-fade from ts1 to ts2 over [t_start, t_end] (1-based).

    At index i inside the window the ts2 share is
    ``(i - t_start) / (t_end - t_start)``, so the boundaries reproduce
    ts1 and ts2 exactly.
    """
    ts1, ts2 = _paired(ts1, ts2)
    n = len(ts1)
    if not (1 <= t_start < t_end <= n):
        raise ConfigError(f"need 1 <= t_start < t_end <= {n}, got ({t_start}, {t_end})")
    out = ts1.copy()
    idx = np.arange(t_start, t_end + 1)
    w = (idx - t_start) / (t_end - t_start)
    out[t_start - 1 : t_end] = (1.0 - w) * ts1[t_start - 1 : t_end] + w * ts2[t_start - 1 : t_end]
    out[t_end:] = ts2[t_end:]
    return out


def combine_gradual(ts1: np.ndarray, ts2: np.ndarray, seed: int) -> np.ndarray:
    """Per-index Bernoulli pick of ts2 with probability i/length.

    Draws are consumed in index order from a generator seeded with
    ``seed``, so the combination is reproducible from the recorded
    drift metadata alone. The final index always comes from ts2.
    """
    ts1, ts2 = _paired(ts1, ts2)
    n = len(ts1)
    rng = np.random.default_rng(seed)
    take_ts2 = rng.random(n) < np.arange(1, n + 1) / n
    return np.where(take_ts2, ts2, ts1)


def _paired(ts1, ts2) -> tuple[np.ndarray, np.ndarray]:
    ts1 = require_finite(ts1, "ts1")
    ts2 = require_finite(ts2, "ts2")
    if ts1.shape != ts2.shape or ts1.ndim != 1 or ts1.size == 0:
        raise ConfigError("ts1/ts2 must be non-empty 1-D sequences of equal length")
    return ts1, ts2


def series_mean_2(cfg: SimConfig, series_seed: int) -> float:
    """The post-drift process mean for one series: fixed at ``mean_2``,
    or drawn uniformly from [mean_2, mean_2_high] when a range is
    configured (per-series drift magnitudes)."""
    if cfg.mean_2_high is None or cfg.mean_2_high == cfg.mean_2:
        return cfg.mean_2
    rng = np.random.default_rng(spawned_seed(series_seed, _STREAM_MEAN2))
    return float(rng.uniform(cfg.mean_2, cfg.mean_2_high))


def component_pair(cfg: SimConfig, series_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """The two source trajectories for one series.

    The pre-drift trajectory uses ``ar_coeffs`` around ``mean``; the
    post-drift one uses ``ar_coeffs_2`` around this series' post-drift
    mean. Noise streams are independent; ts1 starts at its mean, ts2
    from Gaussian draws under its own stream.
    """
    p = len(cfg.ar_coeffs)
    proc1 = ArProcess(
        coeffs=cfg.ar_coeffs,
        noise_sd=cfg.noise_sd,
        initial=(cfg.mean,) * p,
        seed=spawned_seed(series_seed, _STREAM_TS1),
        mean=cfg.mean,
    )
    mean_2 = series_mean_2(cfg, series_seed)
    init2 = np.random.default_rng(spawned_seed(series_seed, _STREAM_TS2_INIT)).normal(
        mean_2, cfg.noise_sd, size=p
    )
    proc2 = ArProcess(
        coeffs=cfg.ar_coeffs_2,
        noise_sd=cfg.noise_sd,
        initial=tuple(init2),
        seed=spawned_seed(series_seed, _STREAM_TS2),
        mean=mean_2,
    )
    ts1 = gen_ar(proc1, cfg.series_length, cfg.burn_in)
    ts2 = gen_ar(proc2, cfg.series_length, cfg.burn_in)
    return ts1, ts2


def draw_drift_meta(cfg: SimConfig, series_seed: int) -> DriftMeta:
    """Sample the drift placement for one series.

    Sudden points fall in [0.1L, 0.95L]; incremental windows start in
    [0.1L, 0.7L] with widths in [0.05L, 0.25L], so transitions always
    finish inside the series.
    """
    length = cfg.series_length
    rng = np.random.default_rng(spawned_seed(series_seed, _STREAM_DRIFT_PARAMS))
    if cfg.drift_kind == "sudden":
        t_drift = int(rng.integers(math.ceil(0.1 * length), math.floor(0.95 * length) + 1))
        return DriftMeta(kind="sudden", t_drift=t_drift, seed=series_seed)
    if cfg.drift_kind == "incremental":
        t_start = int(rng.integers(math.ceil(0.1 * length), math.floor(0.7 * length) + 1))
        width = int(rng.integers(math.ceil(0.05 * length), math.floor(0.25 * length) + 1))
        return DriftMeta(kind="incremental", t_start=t_start, t_end=t_start + width, seed=series_seed)
    return DriftMeta(kind="gradual", seed=spawned_seed(series_seed, _STREAM_GRADUAL))


def make_series(cfg: SimConfig, ordinal: int) -> TimeSeries:
    """Generate series ``ordinal`` of the dataset described by ``cfg``."""
    series_seed = derive_series_seed(cfg.base_seed, ordinal)
    ts1, ts2 = component_pair(cfg, series_seed)
    meta = draw_drift_meta(cfg, series_seed)
    if meta.kind == "sudden":
        combined = combine_sudden(ts1, ts2, meta.t_drift)
    elif meta.kind == "incremental":
        combined = combine_incremental(ts1, ts2, meta.t_start, meta.t_end)
    else:
        combined = combine_gradual(ts1, ts2, meta.seed)
    return TimeSeries(
        id=f"{cfg.drift_kind}_{ordinal:04d}",
        values=combined,
        train_len=cfg.train_len,
        drift=meta,
    )


def make_dataset(cfg: SimConfig, name: str | None = None) -> Dataset:
    """Generate the full dataset for ``cfg``, ordered by series ordinal."""
    series = tuple(make_series(cfg, i) for i in range(cfg.n_series))
    return Dataset(name=name or cfg.drift_kind, series=series, generator_config=asdict(cfg))
