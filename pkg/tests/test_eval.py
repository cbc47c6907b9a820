from __future__ import annotations

import numpy as np
import pytest

from apbtriage.evaluation import (
    ConfusionMatrix,
    CvResult,
    LengthMismatch,
    SingleClassInput,
    TooFewSamples,
    UnknownLabel,
    confusion_matrix,
    kfold_cv,
    prf_metrics,
    roc_auc,
    stratified_folds,
)
from helpers import auc_oracle, random_auc_instance


def counts_matrix(tp, fn, fp, tn):
    return ConfusionMatrix(("pos", "neg"), np.array([[tp, fn], [fp, tn]]))


def test_diagonal_matrix():
    labels = list("aabbcabcca")
    cm = confusion_matrix(labels, labels, "abc")
    assert np.array_equal(cm.counts, np.diag([4, 3, 3]))
    assert cm.accuracy() == 1.0


def test_binary_accuracy_from_counts():
    cm = counts_matrix(19_930, 70, 0, 20_000)
    assert cm.accuracy() == pytest.approx(0.99825, abs=1e-12)
    m = prf_metrics(cm)
    assert m.accuracy == pytest.approx(99.825)


def test_unknown_and_length_errors():
    with pytest.raises(UnknownLabel):
        confusion_matrix(["a"], ["a"], [])
    with pytest.raises(UnknownLabel):
        confusion_matrix(["a"], ["b"], ["a"])
    with pytest.raises(LengthMismatch):
        confusion_matrix(["a", "a"], ["a"], ["a"])


def test_table_row_perfect_precision():
    m = prf_metrics(counts_matrix(4983, 17, 0, 15_000)).per_class["pos"]
    assert round(m.precision, 2) == 100.00
    assert round(m.recall, 2) == 99.66
    assert round(m.f1, 2) == 99.83
    assert m.tp == 4983


def test_table_row_back_computed_false_positives():
    m = prf_metrics(counts_matrix(3711, 1289, 422, 14_578)).per_class["pos"]
    assert round(m.precision, 2) == 89.79
    assert round(m.recall, 2) == 74.22
    assert round(m.f1, 2) == 81.27


def test_zero_row_flags():
    cm = ConfusionMatrix(("a", "b"), np.array([[0, 0], [3, 5]]))
    m = prf_metrics(cm).per_class
    assert m["a"].recall == 0.0 and "recall_undefined" in m["a"].flags
    assert m["a"].precision == 0.0 and "precision_undefined" not in m["a"].flags
    assert m["b"].flags == []


def test_render_lists_classes():
    text = prf_metrics(counts_matrix(5, 1, 0, 4)).render()
    assert "Overall accuracy 90.00% (9 / 10)" in text


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert roc_auc([0.1, 0.9], [1, 0]) == 0.0
    with pytest.raises(SingleClassInput):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(LengthMismatch):
        roc_auc([0.1], [1, 0])


def test_auc_matches_pair_counting():
    rng = np.random.default_rng(77)
    for trial in range(1000):
        # coarse scores force many ties
        scores, labels = random_auc_instance(rng, coarse=bool(trial % 2))
        assert roc_auc(scores, labels) == pytest.approx(auc_oracle(scores, labels), abs=1e-12)


def test_folds_partition_and_stratify():
    rng = np.random.default_rng(0)
    strata = list(rng.choice(["a", "b", "c"], size=503, p=[0.5, 0.3, 0.2]))
    folds = stratified_folds(strata, 5, seed=42)
    assert set(folds) == set(range(5))
    assert len(folds) == len(strata)
    arr = np.asarray(strata)
    for c in "abc":
        per_fold = np.bincount(folds[arr == c], minlength=5)
        assert per_fold.max() - per_fold.min() <= 1
    sizes = np.bincount(folds)
    assert sizes.max() - sizes.min() <= 1
    assert np.array_equal(folds, stratified_folds(strata, 5, seed=42))
    assert not np.array_equal(folds, stratified_folds(strata, 5, seed=43))


def test_folds_too_few():
    with pytest.raises(TooFewSamples):
        stratified_folds(["a"] * 10 + ["b"] * 3, 5, seed=1)


def test_cv_result_format():
    r = CvResult(5, [0.99, 0.995, 0.998, 0.99, 0.997], seed=42)
    assert r.formatted() == f"{np.mean(r.fold_accuracies):.4f} ± {np.std(r.fold_accuracies, ddof=1):.4f}"
    assert CvResult(5, [0.9940] * 5, 1).formatted() == "0.9940 ± 0.0000"


def test_kfold_cv_runs_each_fold_once():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 2, size=(100, 4))
    y = X[:, 0].copy()
    seen = []

    def fit(X_tr, y_tr):
        seen.append(len(y_tr))
        return lambda X_te: X_te[:, 0]

    res = kfold_cv(X, y, y, fit, k=5, seed=1)
    assert res.fold_accuracies == [1.0] * 5
    assert sum(seen) == 400
