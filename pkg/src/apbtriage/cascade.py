"""Four binary forests run as a first-fire-wins diagnosis cascade.

Stage order is fixed: out-of-range (address features), address short
(address features), data stuck-at-00 and data stuck-at-11 (data features).
A sample no stage claims is ``no_error``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .apb import REPORT_CLASSES, Label, Sample
from .evaluation import CvResult, binary_confusion, confusion_matrix, kfold_cv, prf_metrics, roc_auc
from .faultgen import Dataset
from .forest import (
    DEFAULT_FEATURE_SET,
    CorruptModel,
    Forest,
    Hyperparams,
    featurize_many,
)
from .forest.ensemble import forest_from_dict, forest_to_dict, pack_blob, resolve_jobs, train_forest, unpack_blob

BUNDLE_MAGIC = b"APBC"
BUNDLE_VERSION = 1


class MissingClass(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    name: str
    field: str
    positive: Label
    negatives: tuple[Label, ...]

    def labels(self) -> tuple[Label, ...]:
        return (self.positive,) + self.negatives


TASK_SPECS = {
    "oor": TaskSpec("oor", "address", Label.OUT_OF_RANGE, (Label.NO_ERROR,)),
    "addr": TaskSpec("addr", "address", Label.ADDRESS, (Label.NO_ERROR,)),
    "d0": TaskSpec("d0", "data", Label.DATA_0, (Label.NO_ERROR, Label.DATA_1)),
    "d1": TaskSpec("d1", "data", Label.DATA_1, (Label.NO_ERROR, Label.DATA_0)),
}
STAGES = tuple(TASK_SPECS)


def task_samples(ds: Dataset | Sequence[Sample], task: str) -> list[Sample]:
    spec = TASK_SPECS[task]
    wanted = set(spec.labels())
    samples = ds.samples if isinstance(ds, Dataset) else ds
    return [s for s in samples if s.label in wanted]


def task_matrix(
    ds: Dataset | Sequence[Sample], task: str, feature_set: str = DEFAULT_FEATURE_SET
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and 0/1 targets for one binary task, restricted to its labels."""
    spec = TASK_SPECS[task]
    samples = task_samples(ds, task)
    present = {s.label for s in samples}
    missing = [lab.value for lab in spec.labels() if lab not in present]
    if missing:
        raise MissingClass(f"stage {task!r} needs label(s) {', '.join(missing)} absent from the dataset")
    X = featurize_many(samples, spec.field, feature_set)
    y = np.fromiter((s.label is spec.positive for s in samples), dtype=np.uint8, count=len(samples))
    return X, y


def train_stage(
    ds: Dataset | Sequence[Sample],
    task: str,
    hp: Hyperparams | None = None,
    *,
    feature_set: str = DEFAULT_FEATURE_SET,
    jobs: int | None = 1,
) -> Forest:
    X, y = task_matrix(ds, task, feature_set)
    return train_forest(X, y, hp, task=task, feature_set=feature_set, jobs=jobs)


@dataclass
class CascadeModel:
    oor_model: Forest
    addr_model: Forest
    d0_model: Forest
    d1_model: Forest
    format_version: int = BUNDLE_VERSION

    def __post_init__(self):
        for task in STAGES:
            got = self.model(task).task
            if got != task:
                raise CorruptModel(f"slot {task!r} holds a model trained for {got!r}")

    def model(self, task: str) -> Forest:
        return getattr(self, f"{task}_model")

    def stages(self) -> list[tuple[TaskSpec, Forest]]:
        return [(TASK_SPECS[t], self.model(t)) for t in STAGES]

    @classmethod
    def from_forests(cls, forests: dict[str, Forest]) -> "CascadeModel":
        missing = [t for t in STAGES if t not in forests]
        if missing:
            raise CorruptModel(f"cascade is missing stage(s): {', '.join(missing)}")
        return cls(**{f"{t}_model": forests[t] for t in STAGES})

    def thresholds(self) -> dict[str, float]:
        return {t: self.model(t).threshold for t in STAGES}


def train_cascade(
    ds: Dataset | Sequence[Sample],
    hp: Hyperparams | None = None,
    *,
    feature_set: str = DEFAULT_FEATURE_SET,
    jobs: int | None = 1,
) -> CascadeModel:
    # fail before any training if a stage lacks a class
    for task in STAGES:
        present = {s.label for s in task_samples(ds, task)}
        missing = [lab.value for lab in TASK_SPECS[task].labels() if lab not in present]
        if missing:
            raise MissingClass(f"stage {task!r} needs label(s) {', '.join(missing)} absent from the dataset")
    return CascadeModel.from_forests(
        {t: train_stage(ds, t, hp, feature_set=feature_set, jobs=jobs) for t in STAGES}
    )


_STAGE_LABELS = {"oor": Label.OUT_OF_RANGE, "addr": Label.ADDRESS, "d0": Label.DATA_0, "d1": Label.DATA_1}


def diagnose_trace(m: CascadeModel, s: Sample) -> tuple[Label, list[str]]:
    """Label plus the stages evaluated, in order; the firing stage is last."""
    invoked = []
    features: dict[str, np.ndarray] = {}
    for spec, forest in m.stages():
        if spec.field not in features:
            features[spec.field] = featurize_many([s], spec.field, forest.feature_set)[0]
        invoked.append(spec.name)
        if forest.fires(features[spec.field]):
            return _STAGE_LABELS[spec.name], invoked
    return Label.NO_ERROR, invoked


def diagnose(m: CascadeModel, s: Sample) -> Label:
    return diagnose_trace(m, s)[0]


def _diagnose_block(m: CascadeModel, samples: Sequence[Sample]) -> list[Label]:
    out: list[Label | None] = [None] * len(samples)
    pending = np.arange(len(samples))
    feats: dict[tuple[str, str], np.ndarray] = {}
    for spec, forest in m.stages():
        if not len(pending):
            break
        key = (spec.field, forest.feature_set)
        if key not in feats:
            feats[key] = featurize_many(samples, spec.field, forest.feature_set)
        fired = forest.predict(feats[key][pending])
        for i in pending[fired]:
            out[int(i)] = _STAGE_LABELS[spec.name]
        pending = pending[~fired]
    for i in pending:
        out[int(i)] = Label.NO_ERROR
    return out


# process-pool state for batch diagnosis
_MODEL: list = []


def _init_diag(m):
    _MODEL[:] = [m]


def _diag_chunk(samples):
    return _diagnose_block(_MODEL[0], samples)


def diagnose_many(m: CascadeModel, samples: Sequence[Sample], jobs: int | None = 1) -> list[Label]:
    """Batch diagnosis with the same short-circuit semantics as ``diagnose``.

    Later stages only score samples earlier stages did not claim. Results
    are in input order for any ``jobs``.
    """
    samples = list(samples)
    jobs = min(resolve_jobs(jobs), max(1, len(samples)))
    if jobs == 1:
        return _diagnose_block(m, samples)
    step = -(-len(samples) // jobs)
    chunks = [samples[i : i + step] for i in range(0, len(samples), step)]
    with ProcessPoolExecutor(jobs, initializer=_init_diag, initargs=(m,)) as ex:
        parts = list(ex.map(_diag_chunk, chunks))
    return [lab for part in parts for lab in part]


def stage_scores(m: CascadeModel, ds: Dataset | Sequence[Sample], task: str) -> tuple[np.ndarray, np.ndarray]:
    """(probabilities, 0/1 truth) of one stage on its own task subset."""
    forest = m.model(task)
    X, y = task_matrix(ds, task, forest.feature_set)
    return forest.predict_proba(X), y


def cascade_to_dict(m: CascadeModel) -> dict:
    return {"format_version": m.format_version, "models": {t: forest_to_dict(m.model(t)) for t in STAGES}}


def save_cascade(m: CascadeModel) -> bytes:
    return pack_blob(BUNDLE_MAGIC, BUNDLE_VERSION, cascade_to_dict(m))


def load_cascade(data: bytes) -> CascadeModel:
    doc = unpack_blob(data, BUNDLE_MAGIC, BUNDLE_VERSION)
    models = doc.get("models") if isinstance(doc, dict) else None
    if not isinstance(models, dict):
        raise CorruptModel("bundle has no model table")
    missing = [t for t in STAGES if t not in models]
    if missing:
        raise CorruptModel(f"bundle is missing stage(s): {', '.join(missing)}")
    return CascadeModel.from_forests({t: forest_from_dict(models[t]) for t in STAGES})


def with_stage(m: CascadeModel, forest: Forest) -> CascadeModel:
    forests = {t: m.model(t) for t in STAGES}
    forests[forest.task] = forest
    return CascadeModel.from_forests(forests)


def cross_validate_stage(
    ds: Dataset | Sequence[Sample],
    task: str,
    hp: Hyperparams | None = None,
    *,
    k: int = 5,
    seed: int = 42,
    feature_set: str = DEFAULT_FEATURE_SET,
    jobs: int | None = 1,
    scope: str = "full",
) -> CvResult:
    """Stratified k-fold accuracy of one stage, stratified on the fine labels."""
    samples = task_samples(ds, task)
    X, y = task_matrix(samples, task, feature_set)

    def fit(X_tr, y_tr):
        forest = train_forest(X_tr, y_tr, hp, task=task, feature_set=feature_set, jobs=jobs)
        return forest.predict

    return kfold_cv(X, y, [s.label for s in samples], fit, k=k, seed=seed, scope=scope)


FINE_CLASSES = tuple(lab.value for lab in (Label.OUT_OF_RANGE, Label.ADDRESS, Label.DATA_0, Label.DATA_1, Label.NO_ERROR))


def evaluate_cascade(m: CascadeModel, ds: Dataset | Sequence[Sample], *, jobs: int | None = 1) -> dict:
    """Per-stage binary metrics plus fine and merged cascade confusion matrices."""
    samples = ds.samples if isinstance(ds, Dataset) else list(ds)
    stages = {}
    for task in STAGES:
        spec = TASK_SPECS[task]
        if not {s.label for s in task_samples(samples, task)} >= set(spec.labels()):
            continue
        proba, y = stage_scores(m, samples, task)
        pred = proba >= m.model(task).threshold
        negative = "non_" + spec.positive.value if len(spec.negatives) > 1 else spec.negatives[0].value
        cm = binary_confusion(y, pred, spec.positive.value, negative)
        stages[task] = {
            "confusion": cm.to_dict(),
            "accuracy": round(cm.accuracy(), 6),
            "auc": round(roc_auc(proba, y), 6),
            "threshold": m.model(task).threshold,
        }
    truth = [s.label for s in samples]
    pred = diagnose_many(m, samples, jobs)
    fine = confusion_matrix(truth, pred, FINE_CLASSES)
    merged = confusion_matrix([t.reported for t in truth], [p.reported for p in pred], REPORT_CLASSES)
    return {
        "stages": stages,
        "cascade_fine": {"confusion": fine.to_dict(), "metrics": prf_metrics(fine).to_dict()},
        "cascade_merged": {"confusion": merged.to_dict(), "metrics": prf_metrics(merged).to_dict()},
        "predictions": [p.value for p in pred],
    }
