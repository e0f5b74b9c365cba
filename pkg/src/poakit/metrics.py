"""Segment-aware evaluation metrics for precursor and anomaly detection.

Implements the precursor-aware precision/recall family (PTaP / PTaR / PTaPR
with the overlap-threshold sweep and its AUC), the segment-aware TaPR
baseline, the PA%K point-adjustment protocol, and plain point-wise P/R/F1.

Scoring model, in brief: each ground-truth anomaly ``a`` earns credit from
every prediction ``p`` through an overlap score

    O(a, p, p') = |a n p'| + |a n p| + S(a', p)

where ``p'`` is the precursor run attached to ``p`` and ``S`` gives
sigmoid-decayed partial credit for alarms that persist into the ambiguous
window ``a'`` trailing the anomaly. Detection membership, coverage and an
early-warning reward are combined as weighted components on both the recall
(per anomaly) and precision (per prediction) side.

A segment with zero credit never counts as detected, even at overlap
threshold 0, mirroring the strictly-positive rule PA%K uses at K=0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from poakit.core import Segment, SegmentSet, ValidationError, segments_from_flags

DEFAULT_THETA_GRID_SIZE = 101


@dataclass(frozen=True)
class MetricParams:
    """Knobs of the metric family.

    theta: minimum overlap ratio for a segment to count as detected.
    alpha/beta/gamma: weights of the detection / coverage / early components
        (must sum to 1).
    delta: ambiguous-window length used when building segment sets.
    epsilon: optimal lead time of the early reward; k: its decay sharpness.
    tapr_alpha: detection-vs-coverage weight of the TaPR baseline.
    early_point: which precursor instant earns the reward, its "earliest"
        point (first alert) or the "max_reward" point.
    """

    theta: float = 0.0
    alpha: float = 1.0 / 3.0
    beta: float = 1.0 / 3.0
    gamma: float = 1.0 / 3.0
    delta: int = 24
    epsilon: int = 7
    k: float = 0.001
    tapr_alpha: float = 0.5
    early_point: str = "earliest"

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError(f"theta must be in [0, 1], got {self.theta}")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValidationError("component weights must be >= 0")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-12:
            raise ValidationError(
                f"alpha+beta+gamma must equal 1, got {self.alpha + self.beta + self.gamma}"
            )
        if self.delta < 0:
            raise ValidationError("delta must be >= 0")
        if self.epsilon < 1:
            raise ValidationError("epsilon must be >= 1")
        if self.k <= 0:
            raise ValidationError("k must be > 0")
        if not 0.0 <= self.tapr_alpha <= 1.0:
            raise ValidationError("tapr_alpha must be in [0, 1]")
        if self.early_point not in ("earliest", "max_reward"):
            raise ValidationError("early_point must be 'earliest' or 'max_reward'")


@dataclass(frozen=True)
class ComponentScore:
    """One side (recall or precision): weighted score plus its components."""

    score: float
    detection: float
    portion: float
    early: float
    undefined: bool = False  # set when there were no predictions to score


@dataclass(frozen=True)
class MetricReport:
    ptar: float
    ptap: float
    f1: float
    recall: ComponentScore
    precision: ComponentScore
    anomaly_coverage: tuple[float, ...]
    anomaly_reward: tuple[float, ...]
    prediction_coverage: tuple[float, ...]
    prediction_reward: tuple[float, ...]
    params: MetricParams = field(repr=False, default=MetricParams())


@dataclass(frozen=True)
class ThetaSweep:
    thetas: np.ndarray
    ptar: np.ndarray
    ptap: np.ndarray
    f1: np.ndarray
    auc: float
    f1_at_0: float
    f1_at_1: float


@dataclass(frozen=True)
class TaprResult:
    tar: float
    tap: float
    f1: float
    tar_detection: float
    tar_portion: float
    tap_detection: float
    tap_portion: float


@dataclass(frozen=True)
class PaKResult:
    k_values: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    f1_pa: float  # K = 0, the classic point-adjusted F1
    f1_pointwise: float  # no adjustment at all
    auc: float


def sigmoid_position_weight(offset: int, delta: int) -> float:
    """Weight of the ambiguous position ``offset`` steps past the anomaly.

    Positions are mapped linearly onto [-6, 6] across the delta-wide window
    and passed through a falling sigmoid, so credit decays from ~1 right
    after the anomaly to ~0 at the window's far end. A window of one position
    (delta <= 1) sits at the near end.
    """
    if offset < 0:
        raise ValidationError("ambiguous offset must be >= 0")
    if delta <= 1:
        scaled = -6.0
    else:
        scaled = -6.0 + 12.0 * offset / (delta - 1)
    return 1.0 / (1.0 + math.exp(scaled))


def ambiguous_score(a_prime: Segment | None, p: Segment, delta: int) -> float:
    """Sigmoid-weighted count of prediction points inside the ambiguous window."""
    if a_prime is None:
        return 0.0
    lo = max(a_prime.start, p.start)
    hi = min(a_prime.end, p.end)
    if hi < lo:
        return 0.0
    return sum(
        sigmoid_position_weight(i - a_prime.start, delta) for i in range(lo, hi + 1)
    )


def overlap_score(
    a: Segment,
    p: Segment,
    p_prime: Segment | None,
    a_prime: Segment | None,
    delta: int,
) -> float:
    """Credit prediction p (with precursor p') gives anomaly a."""
    return (
        float(a.overlap_len(p_prime))
        + float(a.overlap_len(p))
        + ambiguous_score(a_prime, p, delta)
    )


def early_reward(
    a: Segment,
    p_prime: Segment | None,
    epsilon: int,
    k: float,
    point: str = "earliest",
) -> float:
    """Gaussian reward for warning ``lead`` steps before the anomaly onset.

    The reward peaks at 1 when the lead equals epsilon and decays with
    sharpness k. With ``point="earliest"`` the lead is measured at the
    precursor's first point (the moment the alert actually started);
    ``point="max_reward"`` instead picks the precursor point whose lead is
    closest to epsilon. No precursor point before the onset means no reward.
    """
    if k <= 0:
        raise ValidationError("k must be > 0")
    if epsilon < 1:
        raise ValidationError("epsilon must be >= 1")
    if point not in ("earliest", "max_reward"):
        raise ValidationError("point must be 'earliest' or 'max_reward'")
    if p_prime is None or p_prime.start >= a.start:
        return 0.0
    if point == "earliest":
        i = p_prime.start
    else:
        # closest point to onset - epsilon, clamped to points before the onset
        i = min(max(p_prime.start, a.start - epsilon), min(p_prime.end, a.start - 1))
    lead = a.start - i
    return math.exp(-k * (lead - epsilon) ** 2)


@dataclass(frozen=True)
class _Diagnostics:
    anomaly_coverage: np.ndarray
    anomaly_reward: np.ndarray
    prediction_coverage: np.ndarray
    prediction_reward: np.ndarray


def _diagnostics(segments: SegmentSet, params: MetricParams) -> _Diagnostics:
    """Per-anomaly and per-prediction coverage ratios and early rewards.

    The reward pairing requires a strictly positive overlap score between the
    anomaly and the prediction; the best reward among paired partners counts.
    """
    anomalies = segments.anomalies
    predictions = segments.predictions
    n_a, n_p = len(anomalies), len(predictions)
    overlap = np.zeros((n_a, n_p))
    reward = np.zeros((n_a, n_p))
    for ai, (a, a_prime) in enumerate(zip(anomalies, segments.ambiguous)):
        for pi, (p, p_prime) in enumerate(zip(predictions, segments.precursors)):
            overlap[ai, pi] = overlap_score(a, p, p_prime, a_prime, segments.delta)
            reward[ai, pi] = early_reward(
                a, p_prime, params.epsilon, params.k, params.early_point
            )
    paired = overlap > 0.0
    reward = np.where(paired, reward, 0.0)
    a_len = np.array([a.length for a in anomalies], dtype=float)
    p_len = np.array([p.length for p in predictions], dtype=float)
    return _Diagnostics(
        anomaly_coverage=overlap.sum(axis=1) / a_len if n_a else np.zeros(0),
        anomaly_reward=reward.max(axis=1, initial=0.0) if n_p else np.zeros(n_a),
        prediction_coverage=overlap.sum(axis=0) / p_len if n_p else np.zeros(0),
        prediction_reward=reward.max(axis=0, initial=0.0) if n_a else np.zeros(n_p),
    )


def _detected_fraction(coverage: np.ndarray, theta: float) -> float:
    if coverage.size == 0:
        return 0.0
    return float(np.mean((coverage >= theta) & (coverage > 0.0)))


def weighted_component_score(
    detection: float, portion: float, early: float, params: MetricParams
) -> float:
    """Combine the three components with the alpha/beta/gamma weights."""
    return params.alpha * detection + params.beta * portion + params.gamma * early


def ptar(segments: SegmentSet, params: MetricParams) -> ComponentScore:
    """Precursor-aware recall: detection rate, coverage, early reward per anomaly."""
    if not segments.anomalies:
        raise ValidationError("no ground-truth segments: recall is undefined")
    diag = _diagnostics(segments, params)
    detection = _detected_fraction(diag.anomaly_coverage, params.theta)
    portion = float(np.mean(np.minimum(1.0, diag.anomaly_coverage)))
    early = float(np.mean(diag.anomaly_reward))
    return ComponentScore(
        score=weighted_component_score(detection, portion, early, params),
        detection=detection,
        portion=portion,
        early=early,
    )


def ptap(segments: SegmentSet, params: MetricParams) -> ComponentScore:
    """Precursor-aware precision, per prediction; 0 (marked) with no predictions."""
    if not segments.predictions:
        return ComponentScore(0.0, 0.0, 0.0, 0.0, undefined=True)
    diag = _diagnostics(segments, params)
    detection = _detected_fraction(diag.prediction_coverage, params.theta)
    portion = float(np.mean(np.minimum(1.0, diag.prediction_coverage)))
    early = float(np.mean(diag.prediction_reward))
    return ComponentScore(
        score=weighted_component_score(detection, portion, early, params),
        detection=detection,
        portion=portion,
        early=early,
    )


def ptapr_f1(ptar_value: float, ptap_value: float) -> float:
    """Harmonic mean of the recall- and precision-side scores; 0 when both are 0."""
    for name, value in (("ptar", ptar_value), ("ptap", ptap_value)):
        if not 0.0 <= value <= 1.0 + 1e-12:
            raise ValidationError(f"{name} must be in [0, 1], got {value}")
    if ptar_value + ptap_value == 0.0:
        return 0.0
    return 2.0 * ptar_value * ptap_value / (ptar_value + ptap_value)


def ptapr_report(segments: SegmentSet, params: MetricParams) -> MetricReport:
    """Recall, precision and F1 at ``params.theta`` plus per-segment diagnostics."""
    diag = _diagnostics(segments, params)
    recall = ptar(segments, params)
    precision = ptap(segments, params)
    return MetricReport(
        ptar=recall.score,
        ptap=precision.score,
        f1=ptapr_f1(recall.score, precision.score),
        recall=recall,
        precision=precision,
        anomaly_coverage=tuple(diag.anomaly_coverage),
        anomaly_reward=tuple(diag.anomaly_reward),
        prediction_coverage=tuple(diag.prediction_coverage),
        prediction_reward=tuple(diag.prediction_reward),
        params=params,
    )


def early_prf(segments: SegmentSet, params: MetricParams) -> tuple[float, float, float]:
    """The early-warning components alone: (precision_e, recall_e, their F1)."""
    recall_e = ptar(segments, params).early
    precision_e = ptap(segments, params).early
    if precision_e + recall_e == 0.0:
        return precision_e, recall_e, 0.0
    return precision_e, recall_e, 2 * precision_e * recall_e / (precision_e + recall_e)


def auc_trapezoid(xs: np.ndarray, ys: np.ndarray) -> float:
    """Trapezoidal area under (xs, ys) with xs sorted ascending."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValidationError("need matching 1-D arrays with >= 2 points")
    if np.any(np.diff(xs) < 0):
        raise ValidationError("xs must be sorted ascending")
    return float(np.sum(np.diff(xs) * (ys[1:] + ys[:-1]) / 2.0))


def ptapr_theta_sweep(
    segments: SegmentSet,
    params: MetricParams,
    thetas=None,
) -> ThetaSweep:
    """F1 across overlap thresholds, with its trapezoidal AUC over [0, 1].

    The grid is sorted and the endpoints 0 and 1 are added when absent, so
    the reported AUC always spans the full range. Only the detection-rate
    components depend on theta, so the per-segment credit is computed once.
    """
    if thetas is None:
        thetas = np.linspace(0.0, 1.0, DEFAULT_THETA_GRID_SIZE)
    thetas = np.asarray(sorted(set(float(t) for t in thetas)))
    if thetas.size == 0:
        raise ValidationError("theta grid must not be empty")
    if thetas[0] < 0.0 or thetas[-1] > 1.0:
        raise ValidationError("thetas must lie within [0, 1]")
    if thetas[0] != 0.0:
        thetas = np.concatenate([[0.0], thetas])
    if thetas[-1] != 1.0:
        thetas = np.concatenate([thetas, [1.0]])

    if not segments.anomalies:
        raise ValidationError("no ground-truth segments: recall is undefined")
    diag = _diagnostics(segments, params)
    portion_r = float(np.mean(np.minimum(1.0, diag.anomaly_coverage)))
    early_r = float(np.mean(diag.anomaly_reward))
    has_predictions = bool(segments.predictions)
    if has_predictions:
        portion_p = float(np.mean(np.minimum(1.0, diag.prediction_coverage)))
        early_p = float(np.mean(diag.prediction_reward))

    ptar_curve = np.empty_like(thetas)
    ptap_curve = np.empty_like(thetas)
    f1_curve = np.empty_like(thetas)
    for idx, theta in enumerate(thetas):
        d_r = _detected_fraction(diag.anomaly_coverage, theta)
        r = weighted_component_score(d_r, portion_r, early_r, params)
        if has_predictions:
            d_p = _detected_fraction(diag.prediction_coverage, theta)
            p = weighted_component_score(d_p, portion_p, early_p, params)
        else:
            p = 0.0
        ptar_curve[idx] = r
        ptap_curve[idx] = p
        f1_curve[idx] = ptapr_f1(r, p)
    return ThetaSweep(
        thetas=thetas,
        ptar=ptar_curve,
        ptap=ptap_curve,
        f1=f1_curve,
        auc=auc_trapezoid(thetas, f1_curve),
        f1_at_0=float(f1_curve[0]),
        f1_at_1=float(f1_curve[-1]),
    )


def merge_precursors_into_predictions(segments: SegmentSet) -> SegmentSet:
    """Fold each precursor back into its prediction (the original flagged runs)."""
    merged = []
    for p, pp in zip(segments.predictions, segments.precursors):
        if pp is None:
            merged.append(p)
        else:
            merged.append(Segment(pp.start, pp.length + p.length))
    return SegmentSet(
        anomalies=segments.anomalies,
        predictions=tuple(merged),
        precursors=(None,) * len(merged),
        ambiguous=segments.ambiguous,
        delta=segments.delta,
    )


def tapr(segments: SegmentSet, params: MetricParams) -> TaprResult:
    """Segment-aware TaPR baseline: no precursor notion, no early reward.

    All flagged points count inside the prediction (precursors are folded
    back in) and the overlap credit is |a n p| + S(a', p). Detection and
    coverage components are weighted by tapr_alpha / (1 - tapr_alpha).
    """
    if not segments.anomalies:
        raise ValidationError("no ground-truth segments: recall is undefined")
    merged = merge_precursors_into_predictions(segments)
    anomalies = merged.anomalies
    predictions = merged.predictions
    n_a, n_p = len(anomalies), len(predictions)
    overlap = np.zeros((n_a, n_p))
    for ai, (a, a_prime) in enumerate(zip(anomalies, merged.ambiguous)):
        for pi, p in enumerate(predictions):
            overlap[ai, pi] = overlap_score(a, p, None, a_prime, merged.delta)
    a_len = np.array([a.length for a in anomalies], dtype=float)
    cov_a = overlap.sum(axis=1) / a_len
    tar_d = _detected_fraction(cov_a, params.theta)
    tar_p = float(np.mean(np.minimum(1.0, cov_a)))
    tar = params.tapr_alpha * tar_d + (1 - params.tapr_alpha) * tar_p
    if n_p:
        p_len = np.array([p.length for p in predictions], dtype=float)
        cov_p = overlap.sum(axis=0) / p_len
        tap_d = _detected_fraction(cov_p, params.theta)
        tap_p = float(np.mean(np.minimum(1.0, cov_p)))
        tap = params.tapr_alpha * tap_d + (1 - params.tapr_alpha) * tap_p
    else:
        tap_d = tap_p = tap = 0.0
    return TaprResult(
        tar=tar,
        tap=tap,
        f1=ptapr_f1(tar, tap),
        tar_detection=tar_d,
        tar_portion=tar_p,
        tap_detection=tap_d,
        tap_portion=tap_p,
    )


def _binary_pair(flags, labels) -> tuple[np.ndarray, np.ndarray]:
    flags = np.asarray(flags, dtype=np.int8)
    labels = np.asarray(labels, dtype=np.int8)
    if flags.shape != labels.shape or flags.ndim != 1:
        raise ValidationError("flags and labels must be 1-D and equal length")
    for name, arr in (("flags", flags), ("labels", labels)):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValidationError(f"{name} must be 0 or 1")
    return flags, labels


def pointwise_prf(flags, labels) -> tuple[float, float, float]:
    """Plain point-wise precision, recall, F1 (0 where undefined)."""
    flags, labels = _binary_pair(flags, labels)
    tp = float(np.sum((flags == 1) & (labels == 1)))
    fp = float(np.sum((flags == 1) & (labels == 0)))
    fn = float(np.sum((flags == 0) & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def point_adjust(flags, labels, k_percent: float) -> np.ndarray:
    """PA%K adjustment: fully flag each anomaly segment that is >= K% covered.

    At K = 0 a single flagged point suffices (strictly positive coverage).
    Flags outside anomaly segments are left untouched.
    """
    flags, labels = _binary_pair(flags, labels)
    if not 0.0 <= k_percent <= 100.0:
        raise ValidationError(f"K must be in [0, 100], got {k_percent}")
    adjusted = flags.copy()
    for seg in segments_from_flags(labels):
        fraction = float(np.mean(flags[seg.start : seg.end + 1]))
        hit = fraction > 0.0 if k_percent == 0.0 else fraction >= k_percent / 100.0
        if hit:
            adjusted[seg.start : seg.end + 1] = 1
    return adjusted


def pa_k_suite(flags, labels, k_grid=None) -> PaKResult:
    """Point-adjusted P/R/F1 across K plus the trapezoidal AUC over K in [0, 100].

    The K axis is normalized to [0, 1] for the AUC; endpoints 0 and 100 are
    added when the grid lacks them.
    """
    flags, labels = _binary_pair(flags, labels)
    if k_grid is None:
        k_grid = np.arange(0.0, 101.0, 10.0)
    ks = np.asarray(sorted(set(float(k) for k in k_grid)))
    if ks.size == 0:
        raise ValidationError("K grid must not be empty")
    if ks[0] < 0.0 or ks[-1] > 100.0:
        raise ValidationError("K values must lie within [0, 100]")
    if ks[0] != 0.0:
        ks = np.concatenate([[0.0], ks])
    if ks[-1] != 100.0:
        ks = np.concatenate([ks, [100.0]])
    precision = np.empty_like(ks)
    recall = np.empty_like(ks)
    f1 = np.empty_like(ks)
    for idx, k in enumerate(ks):
        adjusted = point_adjust(flags, labels, k)
        precision[idx], recall[idx], f1[idx] = pointwise_prf(adjusted, labels)
    _, _, f1_pointwise = pointwise_prf(flags, labels)
    return PaKResult(
        k_values=ks,
        precision=precision,
        recall=recall,
        f1=f1,
        f1_pa=float(f1[0]),
        f1_pointwise=f1_pointwise,
        auc=auc_trapezoid(ks / 100.0, f1),
    )
