"""Sliding windows, lightweight forecasters, ensemble selection, file ingest.

Multi-step forecasts are produced recursively for the one-step models
(autoregressive, smoothing, moving average) and by direct repetition for
persistence / seasonal naive. Externally produced forecasts can enter the
pipeline through :func:`ingest_external_forecasts` instead, as long as they
follow the record format documented there.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from poakit.core import DataFormatError, TimeSeries, ValidationError

FORECASTER_KINDS = (
    "persistence",
    "seasonal_naive",
    "moving_average",
    "ar_ols",
    "exp_smoothing",
    "holt_linear",
)


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window geometry: input length, horizon length, stride."""

    input_len: int
    horizon_len: int
    stride: int = 1

    def __post_init__(self):
        if self.input_len < 1 or self.horizon_len < 1 or self.stride < 1:
            raise ValidationError(
                f"window config fields must be >= 1, got {self}"
            )


@dataclass(frozen=True)
class WindowPair:
    """One window: input ends at row ``origin``; target covers origin+1..origin+L_y."""

    window_id: int
    origin: int
    input: np.ndarray
    target: np.ndarray | None = None


@dataclass(frozen=True)
class ForecasterSpec:
    """Forecaster kind plus its hyperparameters (only the relevant ones set)."""

    kind: str
    period: int | None = None
    width: int | None = None
    order: int | None = None
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in FORECASTER_KINDS:
            raise ValidationError(
                f"unknown forecaster kind {self.kind!r}; choose from {FORECASTER_KINDS}"
            )
        need = {
            "persistence": (),
            "seasonal_naive": ("period",),
            "moving_average": ("width",),
            "ar_ols": ("order",),
            "exp_smoothing": ("alpha",),
            "holt_linear": ("alpha", "beta"),
        }[self.kind]
        for name in ("period", "width", "order"):
            value = getattr(self, name)
            if name in need:
                if value is None or value < 1:
                    raise ValidationError(f"{self.kind} requires {name} >= 1")
            elif value is not None:
                raise ValidationError(f"{self.kind} does not take {name}")
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if name in need:
                if value is None or not (0.0 < value <= 1.0):
                    raise ValidationError(f"{self.kind} requires {name} in (0, 1]")
            elif value is not None:
                raise ValidationError(f"{self.kind} does not take {name}")

    @property
    def member_id(self) -> str:
        parts = [self.kind]
        for name in ("period", "width", "order", "alpha", "beta"):
            value = getattr(self, name)
            if value is not None:
                parts.append(f"{value:g}" if isinstance(value, float) else str(value))
        return "_".join(parts)

    @property
    def spec_string(self) -> str:
        """Colon-separated form accepted by :meth:`parse`."""
        parts = [self.kind]
        for name in ("period", "width", "order", "alpha", "beta"):
            value = getattr(self, name)
            if value is not None:
                parts.append(f"{value:g}" if isinstance(value, float) else str(value))
        return ":".join(parts)

    @classmethod
    def parse(cls, text: str) -> "ForecasterSpec":
        """Parse a colon-separated spec, e.g. ``ar_ols:4`` or ``holt_linear:0.3:0.1``."""
        parts = text.strip().split(":")
        kind, args = parts[0], parts[1:]
        try:
            if kind == "persistence":
                return cls(kind)
            if kind == "seasonal_naive":
                return cls(kind, period=int(args[0]))
            if kind == "moving_average":
                return cls(kind, width=int(args[0]))
            if kind == "ar_ols":
                return cls(kind, order=int(args[0]))
            if kind == "exp_smoothing":
                return cls(kind, alpha=float(args[0]))
            if kind == "holt_linear":
                return cls(kind, alpha=float(args[0]), beta=float(args[1]))
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"cannot parse forecaster spec {text!r}: {exc}") from exc
        raise ValidationError(f"unknown forecaster kind in {text!r}")


def default_member_specs() -> list[ForecasterSpec]:
    """Heterogeneous default ensemble pool (six members)."""
    return [
        ForecasterSpec("persistence"),
        ForecasterSpec("seasonal_naive", period=24),
        ForecasterSpec("moving_average", width=12),
        ForecasterSpec("ar_ols", order=4),
        ForecasterSpec("exp_smoothing", alpha=0.3),
        ForecasterSpec("holt_linear", alpha=0.3, beta=0.1),
    ]


@dataclass(frozen=True)
class FittedForecaster:
    spec: ForecasterSpec
    member_id: str
    n_variables: int
    # ar_ols only: (order+1) x c, row 0 = intercept, row j = coefficient of lag j
    coefficients: np.ndarray | None = None
    fit_report: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class EnsembleForecast:
    """Stacked member predictions for one window: M x L_y x c."""

    window_id: int
    origin: int
    predictions: np.ndarray
    member_ids: tuple[str, ...]

    def __post_init__(self):
        preds = np.asarray(self.predictions, dtype=np.float64)
        if preds.ndim != 3:
            raise ValidationError("ensemble predictions must be M x L_y x c")
        if preds.shape[0] != len(self.member_ids):
            raise ValidationError("one member_id per prediction slab required")
        if len(set(self.member_ids)) != len(self.member_ids):
            raise ValidationError(f"duplicate member_ids: {self.member_ids}")
        if not np.all(np.isfinite(preds)):
            raise ValidationError(f"non-finite prediction in window {self.window_id}")
        object.__setattr__(self, "predictions", preds)
        object.__setattr__(self, "member_ids", tuple(self.member_ids))

    @property
    def n_members(self) -> int:
        return self.predictions.shape[0]


@dataclass(frozen=True)
class ForecastScore:
    member_id: str
    mse: float
    mae: float


def make_windows(
    series: TimeSeries, cfg: WindowConfig, with_targets: bool
) -> list[WindowPair]:
    """Cut sliding windows; with targets, only origins whose horizon fits.

    Window ids increment from 0 in origin order. With stride 1 and targets the
    window count is T - input_len - horizon_len + 1.
    """
    T = len(series)
    required = cfg.input_len + cfg.horizon_len if with_targets else cfg.input_len
    if T < required:
        raise ValidationError(
            f"insufficient length: need at least {required} rows "
            f"({'input+horizon' if with_targets else 'input'}), got {T}"
        )
    last_origin = T - 1 - cfg.horizon_len if with_targets else T - 1
    vals = series.values
    windows = []
    for wid, origin in enumerate(range(cfg.input_len - 1, last_origin + 1, cfg.stride)):
        target = None
        if with_targets:
            target = vals[origin + 1 : origin + 1 + cfg.horizon_len]
        windows.append(
            WindowPair(
                window_id=wid,
                origin=origin,
                input=vals[origin - cfg.input_len + 1 : origin + 1],
                target=target,
            )
        )
    return windows


def fit(spec: ForecasterSpec, train: TimeSeries) -> FittedForecaster:
    """Fit one forecaster; deterministic, per-variable where applicable.

    A rank-deficient least-squares system for ar_ols falls back to persistence
    for the affected variable, noted in the fit report.
    """
    n, c = train.values.shape
    minimum = {
        "persistence": 1,
        "seasonal_naive": spec.period or 1,
        "moving_average": spec.width or 1,
        "ar_ols": 2 * (spec.order or 1) + 1,
        "exp_smoothing": 1,
        "holt_linear": 2,
    }[spec.kind]
    if n < minimum:
        raise ValidationError(
            f"{spec.member_id}: training series too short, need >= {minimum} rows, got {n}"
        )
    coefficients = None
    report: list[str] = []
    if spec.kind == "ar_ols":
        p = spec.order
        coefficients = np.zeros((p + 1, c))
        x = train.values
        design = np.ones((n - p, p + 1))
        for v in range(c):
            for j in range(1, p + 1):
                design[:, j] = x[p - j : n - j, v]
            y = x[p:, v]
            coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
            if rank < p + 1 or not np.all(np.isfinite(coef)):
                # persistence as one-step AR: intercept 0, lag-1 weight 1
                coef = np.zeros(p + 1)
                coef[1] = 1.0
                report.append(f"variable {v}: singular system, fell back to persistence")
            coefficients[:, v] = coef
    return FittedForecaster(
        spec=spec,
        member_id=spec.member_id,
        n_variables=c,
        coefficients=coefficients,
        fit_report=tuple(report),
    )


def predict(model: FittedForecaster, window_input: np.ndarray, horizon: int) -> np.ndarray:
    """Forecast ``horizon`` steps from one L_x x c input window."""
    out = predict_batch(model, np.asarray(window_input, dtype=np.float64)[None, :, :], horizon)
    return out[0]


def predict_batch(model: FittedForecaster, inputs: np.ndarray, horizon: int) -> np.ndarray:
    """Vectorized forecasts for a W x L_x x c batch of input windows."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3:
        raise ValidationError("inputs must be W x L_x x c")
    W, L_x, c = inputs.shape
    if c != model.n_variables:
        raise ValidationError(
            f"{model.member_id}: fitted for {model.n_variables} variables, got {c}"
        )
    if not np.all(np.isfinite(inputs)):
        raise ValidationError("non-finite value in forecast input")
    spec = model.spec
    kind = spec.kind

    if kind == "persistence":
        return np.repeat(inputs[:, -1:, :], horizon, axis=1)

    if kind == "seasonal_naive":
        m = spec.period
        if L_x < m:
            raise ValidationError(
                f"{model.member_id}: input window shorter than period {m}"
            )
        idx = L_x - m + (np.arange(horizon) % m)
        return inputs[:, idx, :]

    if kind == "moving_average":
        w = spec.width
        if L_x < w:
            raise ValidationError(
                f"{model.member_id}: input window shorter than width {w}"
            )
        buf = inputs[:, -w:, :].copy()
        out = np.empty((W, horizon, c))
        for h in range(horizon):
            nxt = buf.mean(axis=1)
            out[:, h, :] = nxt
            buf = np.concatenate([buf[:, 1:, :], nxt[:, None, :]], axis=1)
        return out

    if kind == "ar_ols":
        p = spec.order
        if L_x < p:
            raise ValidationError(f"{model.member_id}: input window shorter than order {p}")
        coef = model.coefficients  # (p+1) x c
        buf = inputs[:, -p:, :].copy()  # oldest..newest
        out = np.empty((W, horizon, c))
        for h in range(horizon):
            nxt = np.broadcast_to(coef[0], (W, c)).copy()
            for j in range(1, p + 1):
                nxt += coef[j] * buf[:, -j, :]
            out[:, h, :] = nxt
            buf = np.concatenate([buf[:, 1:, :], nxt[:, None, :]], axis=1)
        return out

    if kind == "exp_smoothing":
        a = spec.alpha
        level = inputs[:, 0, :].copy()
        for t in range(1, L_x):
            level = a * inputs[:, t, :] + (1.0 - a) * level
        return np.repeat(level[:, None, :], horizon, axis=1)

    if kind == "holt_linear":
        a, b = spec.alpha, spec.beta
        if L_x < 2:
            raise ValidationError(f"{model.member_id}: needs input length >= 2")
        level = inputs[:, 0, :].copy()
        trend = inputs[:, 1, :] - inputs[:, 0, :]
        for t in range(1, L_x):
            prev = level
            level = a * inputs[:, t, :] + (1.0 - a) * (level + trend)
            trend = b * (level - prev) + (1.0 - b) * trend
        steps = np.arange(1, horizon + 1)[None, :, None]
        return level[:, None, :] + steps * trend[:, None, :]

    raise ValidationError(f"unknown forecaster kind {kind!r}")


def forecast_ensembles(
    members: list[FittedForecaster], windows: list[WindowPair], horizon: int
) -> list[EnsembleForecast]:
    """Run every member over every window; members ordered by member_id."""
    if not windows:
        return []
    ordered = sorted(members, key=lambda m: m.member_id)
    ids = tuple(m.member_id for m in ordered)
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate member_ids in ensemble: {ids}")
    inputs = np.stack([w.input for w in windows])
    slabs = [predict_batch(m, inputs, horizon) for m in ordered]
    stacked = np.stack(slabs, axis=1)  # W x M x L_y x c
    return [
        EnsembleForecast(
            window_id=w.window_id,
            origin=w.origin,
            predictions=stacked[i],
            member_ids=ids,
        )
        for i, w in enumerate(windows)
    ]


def evaluate_members(
    predictions: dict[str, np.ndarray], targets: np.ndarray
) -> list[ForecastScore]:
    """MSE/MAE per member over all (window, step, variable) cells.

    ``predictions`` maps member_id to a W x L_y x c array aligned with
    ``targets``. Scores come back sorted by member_id.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 3 or targets.shape[0] < 1:
        raise ValidationError("need at least one validation window")
    scores = []
    for member_id in sorted(predictions):
        pred = np.asarray(predictions[member_id], dtype=np.float64)
        if pred.shape != targets.shape:
            raise ValidationError(
                f"{member_id}: prediction shape {pred.shape} != target shape {targets.shape}"
            )
        err = pred - targets
        scores.append(
            ForecastScore(
                member_id=member_id,
                mse=float(np.mean(err**2)),
                mae=float(np.mean(np.abs(err))),
            )
        )
    return scores


def select_top_k(
    scores: list[ForecastScore], k: int, criterion: str = "mse"
) -> list[str]:
    """The k member_ids with smallest error; ties broken lexicographically."""
    if criterion not in ("mse", "mae"):
        raise ValidationError(f"criterion must be 'mse' or 'mae', got {criterion!r}")
    ids = [s.member_id for s in scores]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate member_ids in scores")
    if not 2 <= k <= len(scores):
        raise ValidationError(
            f"k must be in [2, {len(scores)}] (uncertainty needs >= 2 members), got {k}"
        )
    ranked = sorted(scores, key=lambda s: (getattr(s, criterion), s.member_id))
    return [s.member_id for s in ranked[:k]]


_RECORD_FIELDS = ("window_id", "origin", "member_id", "step", "variable", "value")


def write_forecast_records(path, ensembles: list[EnsembleForecast]) -> None:
    """Write forecasts as flat records (CSV or NDJSON by extension).

    One record per (window, member, step, variable) cell; step is 1-based,
    variable 0-based.
    """
    path = str(path)
    rows = []
    for ens in sorted(ensembles, key=lambda e: e.window_id):
        M, L_y, c = ens.predictions.shape
        for m in range(M):
            for i in range(L_y):
                for v in range(c):
                    rows.append(
                        (
                            ens.window_id,
                            ens.origin,
                            ens.member_ids[m],
                            i + 1,
                            v,
                            float(ens.predictions[m, i, v]),
                        )
                    )
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_RECORD_FIELDS)
            for row in rows:
                writer.writerow(row[:5] + (format(row[5], ".9g"),))
    elif path.endswith((".ndjson", ".jsonl")):
        with open(path, "w") as fh:
            for row in rows:
                fh.write(json.dumps(dict(zip(_RECORD_FIELDS, row))) + "\n")
    else:
        raise ValidationError(f"unsupported forecast file extension: {path}")


def _parse_record(raw: dict, line_no: int) -> tuple:
    try:
        return (
            int(raw["window_id"]),
            int(raw["origin"]),
            str(raw["member_id"]),
            int(raw["step"]),
            int(raw["variable"]),
            float(raw["value"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"line {line_no}: bad forecast record ({exc})") from exc


def ingest_external_forecasts(path) -> list[EnsembleForecast]:
    """Read forecast records and group them into per-window ensembles.

    Every (member, step, variable) cell must appear exactly once per window
    and all windows must share the same member set, horizon and variable
    count. Format auto-detected from the extension (.csv vs .ndjson/.jsonl).
    """
    path = str(path)
    records: list[tuple] = []
    if path.endswith(".csv"):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataFormatError(f"{path}: empty forecast file")
            missing = set(_RECORD_FIELDS) - set(reader.fieldnames)
            if missing:
                raise DataFormatError(f"{path}: header missing columns {sorted(missing)}")
            for line_no, raw in enumerate(reader, start=2):
                records.append(_parse_record(raw, line_no))
    elif path.endswith((".ndjson", ".jsonl")):
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataFormatError(f"line {line_no}: invalid JSON ({exc})") from exc
                records.append(_parse_record(raw, line_no))
    else:
        raise ValidationError(f"unsupported forecast file extension: {path}")
    if not records:
        raise DataFormatError(f"{path}: no forecast records found")

    by_window: dict[int, dict] = {}
    cell_lines: dict[tuple, int] = {}
    for line_no, rec in enumerate(records, start=1):
        wid, origin, member, step, var, value = rec
        if step < 1 or var < 0:
            raise DataFormatError(
                f"record {line_no}: step must be >= 1 and variable >= 0, got ({step}, {var})"
            )
        cell = (wid, member, step, var)
        if cell in cell_lines:
            raise DataFormatError(
                f"record {line_no}: duplicate cell window={wid} member={member!r} "
                f"step={step} variable={var} (first seen at record {cell_lines[cell]})"
            )
        cell_lines[cell] = line_no
        entry = by_window.setdefault(wid, {"origin": origin, "cells": {}})
        if entry["origin"] != origin:
            raise DataFormatError(
                f"record {line_no}: window {wid} has conflicting origins "
                f"{entry['origin']} and {origin}"
            )
        entry["cells"][(member, step, var)] = value

    members = sorted({m for (_, m, _, _) in cell_lines})
    L_y = max(step for (_, _, step, _) in cell_lines)
    c = max(var for (_, _, _, var) in cell_lines) + 1
    expected = len(members) * L_y * c
    ensembles = []
    for wid in sorted(by_window):
        entry = by_window[wid]
        cells = entry["cells"]
        if len(cells) != expected:
            present = set(cells)
            grid = {
                (m, s, v)
                for m in members
                for s in range(1, L_y + 1)
                for v in range(c)
            }
            missing = sorted(grid - present)[:3]
            raise DataFormatError(
                f"window {wid}: expected {expected} cells "
                f"({len(members)} members x {L_y} steps x {c} variables), got "
                f"{len(cells)}; first missing: {missing}"
            )
        preds = np.empty((len(members), L_y, c))
        for mi, member in enumerate(members):
            for s in range(1, L_y + 1):
                for v in range(c):
                    preds[mi, s - 1, v] = cells[(member, s, v)]
        ensembles.append(
            EnsembleForecast(
                window_id=wid,
                origin=entry["origin"],
                predictions=preds,
                member_ids=tuple(members),
            )
        )
    return ensembles
