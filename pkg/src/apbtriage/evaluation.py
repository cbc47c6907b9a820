"""Confusion matrices, precision/recall/F1, rank AUC and stratified k-fold CV."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy.stats import rankdata


class EvalError(Exception):
    pass


class UnknownLabel(EvalError):
    pass


class LengthMismatch(EvalError):
    pass


class SingleClassInput(EvalError):
    pass


class TooFewSamples(EvalError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # counts[i, j]: true classes[i] predicted as classes[j]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"classes": list(self.classes), "counts": self.counts.tolist()}

    def render(self) -> str:
        width = max(12, *(len(c) for c in self.classes)) + 1
        head = "true \\ pred".ljust(width) + "".join(c.rjust(width) for c in self.classes)
        rows = [
            c.ljust(width) + "".join(f"{int(v):>{width},}" for v in self.counts[i])
            for i, c in enumerate(self.classes)
        ]
        return "\n".join([head] + rows)


def _name(label) -> str:
    return label.value if hasattr(label, "value") else str(label)


def confusion_matrix(truth: Sequence[Hashable], pred: Sequence[Hashable], classes: Sequence[Hashable]) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise LengthMismatch(f"{len(truth)} truths vs {len(pred)} predictions")
    names = tuple(_name(c) for c in classes)
    index = {c: i for i, c in enumerate(names)}
    counts = np.zeros((len(names), len(names)), dtype=np.int64)
    for t, p in zip(truth, pred):
        try:
            counts[index[_name(t)], index[_name(p)]] += 1
        except KeyError as exc:
            raise UnknownLabel(f"label {exc.args[0]!r} is not among the classes {list(names)}") from None
    return ConfusionMatrix(names, counts)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    support: int
    flags: list[str] = field(default_factory=list)


@dataclass
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    accuracy: float
    correct: int
    total: int
    auc: dict[str, float] = field(default_factory=dict)
    cv: dict[str, "CvResult"] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_class": {
                c: {
                    "precision": round(m.precision, 4),
                    "recall": round(m.recall, 4),
                    "f1": round(m.f1, 4),
                    "tp": m.tp,
                    "support": m.support,
                    "flags": m.flags,
                }
                for c, m in self.per_class.items()
            },
            "accuracy": round(self.accuracy, 4),
            "correct": self.correct,
            "total": self.total,
            "auc": {k: round(v, 6) for k, v in self.auc.items()},
            "cv": {k: v.to_dict() for k, v in self.cv.items()},
        }

    def render(self) -> str:
        lines = [f"{'Class':<20}{'Precision(%)':>14}{'Recall(%)':>11}{'F1(%)':>9}{'TP':>9}"]
        for c, m in self.per_class.items():
            lines.append(f"{c:<20}{m.precision:>14.2f}{m.recall:>11.2f}{m.f1:>9.2f}{m.tp:>9,}")
        lines.append(f"Overall accuracy {self.accuracy:.2f}% ({self.correct:,} / {self.total:,})")
        for k, v in self.auc.items():
            lines.append(f"AUC[{k}] {v:.4f}")
        for k, v in self.cv.items():
            lines.append(f"{v.k}-fold CV[{k}] accuracy {v.formatted()}")
        return "\n".join(lines)


def prf_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 in percent; empty denominators give 0 and a flag."""
    counts = cm.counts
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    per_class = {}
    for i, c in enumerate(cm.classes):
        tp = int(counts[i, i])
        flags = []
        if col[i]:
            precision = 100.0 * tp / col[i]
        else:
            precision = 0.0
            flags.append("precision_undefined")
        if row[i]:
            recall = 100.0 * tp / row[i]
        else:
            recall = 0.0
            flags.append("recall_undefined")
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = ClassMetrics(float(precision), float(recall), float(f1), tp, int(row[i]), flags)
    correct = int(np.trace(counts))
    total = cm.total
    return MetricsReport(per_class, 100.0 * correct / total if total else 0.0, correct, total)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with average ranks for tied scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("AUC needs both classes")
    ranks = rankdata(scores, method="average")
    r_pos = float(ranks[labels].sum())
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def binary_confusion(y_true: Sequence[int], y_pred: Sequence[int], positive: str, negative: str) -> ConfusionMatrix:
    names = [positive if t else negative for t in y_true], [positive if p else negative for p in y_pred]
    return confusion_matrix(*names, classes=(positive, negative))


# --- cross-validation ------------------------------------------------------------


def stratified_folds(strata: Sequence[Hashable], k: int, seed: int) -> np.ndarray:
    """Fold index per item. Each class is shuffled then dealt round-robin, the
    deal continuing across classes, so every fold holds floor or ceil of its
    share of each class."""
    strata = [_name(s) for s in strata]
    classes = sorted(set(strata))
    counts = {c: strata.count(c) for c in classes}
    short = [c for c in classes if counts[c] < k]
    if short:
        raise TooFewSamples(f"class(es) {', '.join(short)} have fewer than {k} members")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    folds = np.empty(len(strata), dtype=np.int64)
    items = np.asarray(strata)
    start = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(items == c))
        folds[idx] = (start + np.arange(len(idx))) % k
        start = (start + len(idx)) % k
    return folds


@dataclass
class CvResult:
    k: int
    fold_accuracies: list[float]
    seed: int
    scope: str = "full"

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies, ddof=1)) if len(self.fold_accuracies) > 1 else 0.0

    def formatted(self) -> str:
        return f"{self.mean:.4f} ± {self.std:.4f}"

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "scope": self.scope,
            "fold_accuracies": [round(a, 6) for a in self.fold_accuracies],
            "mean": round(self.mean, 6),
            "std": round(self.std, 6),
            "formatted": self.formatted(),
        }


def kfold_cv(
    X: np.ndarray,
    y: np.ndarray,
    strata: Sequence[Hashable],
    fit: Callable[[np.ndarray, np.ndarray], Callable[[np.ndarray], np.ndarray]],
    *,
    k: int = 5,
    seed: int = 42,
    scope: str = "full",
) -> CvResult:
    """Stratified shuffled k-fold; ``fit(X, y)`` returns a predictor of 0/1 labels."""
    folds = stratified_folds(strata, k, seed)
    accs = []
    for f in range(k):
        test = folds == f
        predict = fit(X[~test], y[~test])
        accs.append(float(np.mean(np.asarray(predict(X[test])).astype(bool) == np.asarray(y[test]).astype(bool))))
    return CvResult(k, accs, seed, scope)


def report_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
