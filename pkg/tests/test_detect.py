import numpy as np
import pytest

from poakit.core import (
    LabelSequence,
    ScoreSeries,
    Segment,
    ValidationError,
    segments_from_flags,
)
from poakit.detect import (
    apply_threshold,
    best_f1_threshold,
    default_grid,
    split_precursor_prediction,
)
from poakit.metrics import pointwise_prf


def score_series(values, leads=None):
    values = np.asarray(values, dtype=float)
    if leads is None:
        leads = np.where(np.isnan(values), np.nan, 1.0)
    return ScoreSeries(values, np.asarray(leads, dtype=float))


class TestApplyThreshold:
    def test_above_max_flags_nothing(self):
        s = score_series([0.1, 0.5, 2.0])
        det = apply_threshold(s, 99.0)
        assert not det.flags.any()

    def test_at_or_below_min_flags_all_defined(self):
        s = score_series([0.1, np.nan, 2.0])
        det = apply_threshold(s, 0.1)
        assert np.array_equal(det.flags, [1, 0, 1])

    def test_pointwise_with_missing(self):
        s = score_series([-1.0, 0.5, np.nan, 2.0])
        det = apply_threshold(s, 0.5)
        assert np.array_equal(det.flags, [0, 1, 0, 1])
        assert np.isnan(det.lead_times[0]) and det.lead_times[1] == 1.0

    def test_antitone_in_tau(self):
        rng = np.random.default_rng(21)
        vals = rng.normal(size=40)
        vals[rng.integers(0, 40, size=5)] = np.nan
        s = score_series(vals)
        taus = np.sort(rng.normal(size=10))
        prev = apply_threshold(s, taus[0]).flags
        for tau in taus[1:]:
            cur = apply_threshold(s, tau).flags
            assert np.all(cur <= prev)
            prev = cur

    def test_rejects_non_finite_tau(self):
        with pytest.raises(ValidationError):
            apply_threshold(score_series([1.0]), np.inf)


class TestDefaultGrid:
    def test_dedup_sorted(self):
        s = score_series([1.0, 1.0, 1.0, 5.0])
        grid = default_grid(s, 8)
        assert np.all(np.diff(grid) > 0)
        assert grid[0] == 1.0 and grid[-1] == 5.0

    def test_single_candidate(self):
        grid = default_grid(score_series([3.0, 7.0]), 1)
        assert len(grid) == 1

    def test_no_defined_scores(self):
        with pytest.raises(ValidationError):
            default_grid(score_series([np.nan, np.nan]), 4)


def pointwise_f1_eval(labels):
    def evaluate(det):
        _, _, f1 = pointwise_prf(det.flags, labels.flags)
        return f1

    return evaluate


class TestBestF1Threshold:
    def test_single_candidate(self):
        labels = LabelSequence([0, 1])
        s = score_series([0.0, 5.0])
        res = best_f1_threshold(s, labels, pointwise_f1_eval(labels), [2.0])
        assert res.threshold == 2.0
        assert res.f1 == 1.0

    def test_separable_scores(self):
        flags = np.array([0, 1, 1, 0, 1, 0, 0])
        scores = np.where(flags == 1, 5.0, 0.0)
        labels = LabelSequence(flags)
        res = best_f1_threshold(
            score_series(scores), labels, pointwise_f1_eval(labels), [-1.0, 2.5, 10.0]
        )
        assert res.threshold == 2.5
        assert res.f1 == 1.0
        assert not res.all_undefined

    def test_matches_exhaustive_argmax(self):
        rng = np.random.default_rng(22)
        scores = rng.normal(size=200)
        labels = LabelSequence((rng.random(200) < 0.2).astype(int))
        s = score_series(scores)
        grid = default_grid(s, 64)
        evaluate = pointwise_f1_eval(labels)
        res = best_f1_threshold(s, labels, evaluate, grid)
        # brute force with the documented larger-threshold tie-break
        best = None
        for tau in sorted(grid):
            f1 = evaluate(apply_threshold(s, tau))
            if best is None or f1 >= best[1]:
                best = (tau, f1)
        assert res.threshold == best[0]
        assert res.f1 == best[1]

    def test_tie_break_prefers_larger_threshold(self):
        labels = LabelSequence([0, 0, 1])
        s = score_series([0.0, 0.0, 9.0])
        res = best_f1_threshold(s, labels, pointwise_f1_eval(labels), [1.0, 2.0, 9.0])
        assert res.threshold == 9.0

    def test_all_undefined(self):
        labels = LabelSequence([0, 1])
        s = score_series([0.0, 1.0])
        res = best_f1_threshold(s, labels, lambda det: float("nan"), [0.3, 0.7])
        assert res.all_undefined
        assert res.threshold == 0.7
        assert res.f1 == 0.0

    def test_empty_grid_rejected(self):
        labels = LabelSequence([0])
        with pytest.raises(ValidationError):
            best_f1_threshold(score_series([1.0]), labels, lambda d: 0.0, [])


def detection_from_flags(flags):
    flags = np.asarray(flags, dtype=np.int8)
    leads = np.where(flags == 1, 1.0, np.nan)
    from poakit.detect import Detection

    return Detection(flags=flags, threshold=0.5, lead_times=leads)


class TestSplitPrecursorPrediction:
    def test_split_at_onset(self):
        flags = np.zeros(20, dtype=int)
        flags[8:13] = 1  # run 8..12
        out = split_precursor_prediction(
            detection_from_flags(flags), [Segment(10, 5)], delta=3
        )
        assert out.predictions == (Segment(10, 3),)
        assert out.precursors == (Segment(8, 2),)

    def test_run_inside_anomaly(self):
        flags = np.zeros(20, dtype=int)
        flags[11:14] = 1
        out = split_precursor_prediction(
            detection_from_flags(flags), [Segment(10, 6)], delta=3
        )
        assert out.predictions == (Segment(11, 3),)
        assert out.precursors == (None,)

    def test_run_with_no_overlap_stays_prediction(self):
        flags = np.zeros(20, dtype=int)
        flags[3:7] = 1
        out = split_precursor_prediction(
            detection_from_flags(flags), [Segment(10, 5)], delta=3
        )
        assert out.predictions == (Segment(3, 4),)
        assert out.precursors == (None,)

    def test_run_starting_at_onset(self):
        flags = np.zeros(20, dtype=int)
        flags[10:14] = 1
        out = split_precursor_prediction(
            detection_from_flags(flags), [Segment(10, 5)], delta=3
        )
        assert out.predictions == (Segment(10, 4),)
        assert out.precursors == (None,)

    def test_flags_preserved_exactly(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            T = 40
            flags = rng.integers(0, 2, size=T)
            labels = rng.integers(0, 2, size=T)
            anomalies = segments_from_flags(labels)
            out = split_precursor_prediction(
                detection_from_flags(flags), anomalies, delta=int(rng.integers(0, 5))
            )
            covered = set()
            for seg in out.predictions:
                covered |= set(seg.indices())
            for seg in out.precursors:
                if seg is not None:
                    covered |= set(seg.indices())
            assert covered == set(np.flatnonzero(flags))

    def test_ambiguous_windows_attached(self):
        flags = np.zeros(20, dtype=int)
        out = split_precursor_prediction(
            detection_from_flags(flags), [Segment(5, 3)], delta=4
        )
        assert out.ambiguous == (Segment(8, 4),)
        assert out.delta == 4
