"""Ensemble disagreement -> per-timestamp precursor scores.

The raw score for a (window, horizon step, variable) cell is the sample
variance of the member forecasts at that cell. Because disagreement grows
with the horizon, scores are z-normalized per (step, variable) against
held-out validation statistics before a single threshold is applied, and the
per-window scores are finally attributed to the future timestamps they talk
about.

The variable axis is collapsed (mean by default, max for sensitivity work)
before collation; per-variable timelines are available by passing a single
variable's W x L_y slice of the normalized tensor to
:func:`collate_timeline` directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from poakit.core import ScoreSeries, ValidationError
from poakit.forecast import EnsembleForecast

DEFAULT_EPS_SIGMA = 1e-8


@dataclass(frozen=True)
class UncertaintyTensor:
    """Raw (and optionally normalized) scores, W x L_y x c."""

    values: np.ndarray
    normalized: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise ValidationError("uncertainty values must be W x L_y x c")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValidationError("raw uncertainty values must be finite and >= 0")
        object.__setattr__(self, "values", vals)
        if self.normalized is not None:
            norm = np.asarray(self.normalized, dtype=np.float64)
            if norm.shape != vals.shape:
                raise ValidationError("normalized tensor must match raw shape")
            object.__setattr__(self, "normalized", norm)

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class HorizonStats:
    """Per-(horizon step, variable) mean and population std over windows."""

    mu: np.ndarray
    sigma: np.ndarray
    n_windows: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 2 or sigma.shape != mu.shape:
            raise ValidationError("mu and sigma must be matching L_y x c matrices")
        if np.any(sigma < 0):
            raise ValidationError("sigma must be >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def ensemble_variance(forecast: EnsembleForecast) -> np.ndarray:
    """Per-cell disagreement: sample variance (divisor M-1) across members.

    Exact two-pass computation: subtract the member mean, then average the
    squared deviations.
    """
    preds = forecast.predictions
    M = preds.shape[0]
    if M < 2:
        raise ValidationError(
            f"ensemble too small for variance: need >= 2 members, got {M}"
        )
    mean = preds.mean(axis=0)
    dev = preds - mean[None, :, :]
    return (dev**2).sum(axis=0) / (M - 1)


def uncertainty_from_ensembles(
    ensembles: list[EnsembleForecast],
) -> tuple[UncertaintyTensor, np.ndarray]:
    """Stack per-window variances; returns the tensor plus window origins."""
    if not ensembles:
        raise ValidationError("no ensembles to score")
    ordered = sorted(ensembles, key=lambda e: e.window_id)
    values = np.stack([ensemble_variance(e) for e in ordered])
    origins = np.array([e.origin for e in ordered], dtype=np.int64)
    return UncertaintyTensor(values), origins


def horizon_stats(tensor: UncertaintyTensor) -> HorizonStats:
    """Mean and population std (divisor N) per cell over validation windows."""
    if tensor.n_windows < 2:
        raise ValidationError(
            f"need >= 2 windows for horizon statistics, got {tensor.n_windows}"
        )
    mu = tensor.values.mean(axis=0)
    sigma = np.sqrt(((tensor.values - mu[None]) ** 2).mean(axis=0))
    return HorizonStats(mu=mu, sigma=sigma, n_windows=tensor.n_windows)


def normalize(
    tensor: UncertaintyTensor,
    stats: HorizonStats,
    eps_sigma: float = DEFAULT_EPS_SIGMA,
) -> UncertaintyTensor:
    """Z-score each cell against the validation statistics.

    Degenerate (constant) cells are handled by flooring sigma at
    ``eps_sigma``; raw values are preserved alongside.
    """
    if eps_sigma <= 0:
        raise ValidationError("eps_sigma must be > 0")
    if stats.mu.shape != tensor.values.shape[1:]:
        raise ValidationError(
            f"stats shape {stats.mu.shape} does not match tensor cells "
            f"{tensor.values.shape[1:]}"
        )
    denom = np.maximum(stats.sigma, eps_sigma)
    normalized = (tensor.values - stats.mu[None]) / denom[None]
    return UncertaintyTensor(values=tensor.values, normalized=normalized)


def aggregate_variables(matrix: np.ndarray, mode: str = "mean") -> np.ndarray:
    """Collapse the variable axis of an L_y x c score matrix to one signal."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError("expected an L_y x c matrix")
    if mode == "mean":
        return matrix.mean(axis=1)
    if mode == "max":
        return matrix.max(axis=1)
    raise ValidationError(f"aggregation mode must be 'mean' or 'max', got {mode!r}")


def collate_timeline(
    per_window_scores: np.ndarray,
    origins: np.ndarray,
    series_len: int,
    mode: str = "max",
) -> ScoreSeries:
    """Attribute window scores to the timestamps they forecast.

    A window with origin o scores timestamps o+1 .. o+L_y (step i scores
    o+i); timestamps beyond the series end are dropped. When several windows
    score the same timestamp:

    - ``max``: keep the highest score (ties: the smallest step wins),
    - ``latest``: keep the smallest step (most recently emitted evidence),
    - ``earliest``: keep the largest step (longest lead).

    The kept candidate's step becomes the timestamp's lead time.
    """
    scores2d = np.asarray(per_window_scores, dtype=np.float64)
    origins = np.asarray(origins, dtype=np.int64)
    if scores2d.ndim != 2 or origins.shape != (scores2d.shape[0],):
        raise ValidationError("need W x L_y scores and W origins")
    if mode not in ("max", "latest", "earliest"):
        raise ValidationError(f"collation mode must be max/latest/earliest, got {mode!r}")
    L_y = scores2d.shape[1]
    out = np.full(series_len, np.nan)
    leads = np.full(series_len, np.nan)
    for w in np.argsort(origins, kind="stable"):
        origin = origins[w]
        lo = origin + 1
        hi = min(origin + L_y, series_len - 1)
        if hi < lo:
            continue
        steps = np.arange(lo - origin, hi - origin + 1)
        taus = origin + steps
        cand = scores2d[w, steps - 1]
        if mode == "max":
            # >= so that among equal scores the later window (smaller step) wins
            take = np.isnan(out[taus]) | (cand >= out[taus])
        elif mode == "latest":
            take = np.ones_like(taus, dtype=bool)
        else:  # earliest: first window to reach a timestamp keeps it
            take = np.isnan(out[taus])
        out[taus[take]] = cand[take]
        leads[taus[take]] = steps[take]
    return ScoreSeries(scores=out, lead_times=leads)


def score_timeline(
    test_ensembles: list[EnsembleForecast],
    validation_ensembles: list[EnsembleForecast],
    series_len: int | None = None,
    agg: str = "mean",
    collate: str = "max",
    eps_sigma: float = DEFAULT_EPS_SIGMA,
    normalize_scores: bool = True,
) -> ScoreSeries:
    """Full scoring pipeline: variance -> validation stats -> z-score ->
    variable aggregation -> timeline collation.

    ``series_len`` defaults to max test origin + 1 (a stride-1 window sweep
    ends at the series' last row). ``normalize_scores=False`` skips the
    z-normalization and collates raw variances instead.
    """
    test_tensor, origins = uncertainty_from_ensembles(test_ensembles)
    if series_len is None:
        series_len = int(origins.max()) + 1
    if normalize_scores:
        valid_tensor, _ = uncertainty_from_ensembles(validation_ensembles)
        stats = horizon_stats(valid_tensor)
        test_tensor = normalize(test_tensor, stats, eps_sigma)
        cube = test_tensor.normalized
    else:
        cube = test_tensor.values
    per_window = np.stack([aggregate_variables(cube[w], agg) for w in range(cube.shape[0])])
    return collate_timeline(per_window, origins, series_len, collate)
