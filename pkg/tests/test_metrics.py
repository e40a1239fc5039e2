"""Classification and regression metrics against hand-counted oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cerealia.errors import EmptyInputError, ShapeError
from cerealia.metrics import (
    accuracy,
    confusion,
    f1_from_pr,
    macro_f1,
    prf1,
    regression_metrics,
)
from cerealia.model import CLASS_ORDER, NoiseClass, make_rng


def labels_from(indices):
    return [CLASS_ORDER[i] for i in indices]


class TestConfusion:
    def test_counts_match_pair_counting(self):
        rng = make_rng(11)
        truth = labels_from(rng.integers(0, 5, size=300))
        pred = labels_from(rng.integers(0, 5, size=300))
        m = confusion(truth, pred)
        for i in range(5):
            for j in range(5):
                want = sum(
                    1
                    for t, p in zip(truth, pred)
                    if t is CLASS_ORDER[i] and p is CLASS_ORDER[j]
                )
                assert m.counts[i][j] == want
        assert m.total == 300

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            confusion([NoiseClass.CLEAN], [])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            confusion([], [])


class TestPrf1:
    def test_hand_case(self):
        # truth: clean clean clean random; pred: clean clean random random
        truth = labels_from([0, 0, 0, 1])
        pred = labels_from([0, 0, 1, 1])
        m = confusion(truth, pred)
        s = prf1(m, NoiseClass.CLEAN)
        assert s.precision == 1.0
        assert s.recall == pytest.approx(2 / 3)
        assert s.f1 == pytest.approx(2 * 1.0 * (2 / 3) / (1.0 + 2 / 3))
        r = prf1(m, NoiseClass.RANDOM)
        assert r.precision == 0.5
        assert r.recall == 1.0

    def test_absent_class_scores_zero(self):
        truth = labels_from([0, 0])
        pred = labels_from([0, 0])
        s = prf1(confusion(truth, pred), NoiseClass.BIAS)
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)

    def test_f1_from_pr(self):
        assert f1_from_pr(0.0, 0.0) == 0.0
        assert f1_from_pr(1.0, 1.0) == 1.0
        assert f1_from_pr(0.5, 1.0) == pytest.approx(2 / 3)

    def test_macro_is_mean_over_classes(self):
        rng = make_rng(4)
        truth = labels_from(rng.integers(0, 5, size=200))
        pred = labels_from(rng.integers(0, 5, size=200))
        m = confusion(truth, pred)
        want = np.mean([prf1(m, c).f1 for c in CLASS_ORDER])
        assert macro_f1(m) == pytest.approx(want)

    def test_macro_over_subset(self):
        rng = make_rng(5)
        truth = labels_from(rng.integers(0, 5, size=200))
        pred = labels_from(rng.integers(0, 5, size=200))
        m = confusion(truth, pred)
        subset = (NoiseClass.DRIFT, NoiseClass.BIAS)
        want = np.mean([prf1(m, c).f1 for c in subset])
        assert macro_f1(m, subset) == pytest.approx(want)

    def test_accuracy_is_trace_over_total(self):
        truth = labels_from([0, 1, 2, 3, 4, 0])
        pred = labels_from([0, 1, 0, 3, 0, 0])
        assert accuracy(confusion(truth, pred)) == pytest.approx(4 / 6)


class TestRegression:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 3.0])
        m = regression_metrics(y, y)
        assert m.mae == 0.0
        assert m.rmse == 0.0
        assert m.r2 == 1.0
        assert m.n == 3

    def test_hand_case(self):
        y_true = np.array([0.0, 2.0, 4.0])
        y_pred = np.array([1.0, 2.0, 3.0])
        m = regression_metrics(y_true, y_pred)
        assert m.mae == pytest.approx(2 / 3)
        assert m.rmse == pytest.approx(math.sqrt(2 / 3))
        # SS_res = 2, SS_tot = 8
        assert m.r2 == pytest.approx(1 - 2 / 8)

    def test_constant_truth_has_no_r2(self):
        m = regression_metrics(np.ones(5), np.zeros(5))
        assert not m.r2_defined

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            regression_metrics(np.zeros(3), np.zeros(4))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            regression_metrics(np.array([]), np.array([]))

    @given(
        pairs=st.lists(
            st.tuples(
                st.floats(-1e3, 1e3, allow_nan=False),
                st.floats(-1e3, 1e3, allow_nan=False),
            ),
            min_size=1,
            max_size=60,
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_rmse_dominates_mae(self, pairs):
        y_true = np.array([a for a, _ in pairs])
        y_pred = np.array([b for _, b in pairs])
        m = regression_metrics(y_true, y_pred)
        assert m.rmse + 1e-12 >= m.mae >= 0.0
