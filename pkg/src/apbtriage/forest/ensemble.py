"""Bagged binary random forest with deterministic per-tree seeding."""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._backend import kernels
from .features import DEFAULT_FEATURE_SET, FEATURE_SETS, value_slots
from .tree import Tree, grow_tree

MODEL_MAGIC = b"APBF"
MODEL_VERSION = 1
TASKS = ("oor", "addr", "d0", "d1")


class ForestError(Exception):
    pass


class SingleClassInput(ForestError):
    pass


class WidthMismatch(ForestError):
    pass


class CorruptModel(ForestError):
    pass


class VersionMismatch(ForestError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    tree_count: int = 200
    max_depth: int = 15
    min_samples_split: int = 5
    min_samples_leaf: int = 2
    features_per_split: int | None = None  # None -> floor(sqrt(feature count))
    class_weighting: str = "balanced"
    base_seed: int = 42

    def __post_init__(self):
        for name in ("tree_count", "max_depth", "min_samples_split", "min_samples_leaf"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")
        if self.class_weighting not in ("balanced", "none"):
            raise ValueError(f"unknown class_weighting {self.class_weighting!r}")

    def resolve_features_per_split(self, feature_count: int) -> int:
        k = self.features_per_split or math.isqrt(feature_count)
        if k > feature_count:
            raise ValueError(f"features_per_split {k} exceeds feature count {feature_count}")
        return k


@dataclass
class Forest:
    trees: list[Tree]
    hyperparams: Hyperparams
    task: str
    n_features: int
    feature_set: str = DEFAULT_FEATURE_SET
    threshold: float = 0.5
    _packed: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def packed(self) -> tuple:
        """Trees concatenated into one set of node arrays plus root offsets."""
        if self._packed is None:
            offsets = np.cumsum([0] + [t.node_count for t in self.trees[:-1]]).astype(np.int64)

            def child(name):
                parts = []
                for off, t in zip(offsets, self.trees):
                    arr = getattr(t, name).astype(np.int64)
                    parts.append(np.where(arr >= 0, arr + off, -1))
                return np.ascontiguousarray(np.concatenate(parts), dtype=np.int32)

            self._packed = (
                np.ascontiguousarray(np.concatenate([t.feature for t in self.trees]), dtype=np.int32),
                np.ascontiguousarray(np.concatenate([t.threshold for t in self.trees]), dtype=np.float64),
                child("left"),
                child("right"),
                np.ascontiguousarray(np.concatenate([t.value for t in self.trees]), dtype=np.float64),
                offsets,
            )
        return self._packed

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise WidthMismatch(f"forest expects {self.n_features} features, got {X.shape[1]}")
        X = np.ascontiguousarray(X, dtype=np.uint8)
        proba = kernels().predict_forest(X, *self.packed())
        return proba[0] if single else proba

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X) >= self.threshold

    def fires(self, x: np.ndarray) -> bool:
        return bool(self.predict_proba(x) >= self.threshold)


def predict_proba(forest: Forest, x: np.ndarray):
    return forest.predict_proba(x)


def balanced_weights(y: np.ndarray) -> tuple[float, float]:
    n = len(y)
    n1 = int(np.count_nonzero(y))
    n0 = n - n1
    return n / (2 * n0), n / (2 * n1)


def bootstrap_counts(base_seed: int, tree_index: int, n: int) -> tuple[np.ndarray, np.random.Generator]:
    """Row multiplicities for one tree; the generator continues on to feature sampling."""
    rng = np.random.default_rng([base_seed, tree_index])
    draws = rng.integers(0, n, size=n)
    return np.bincount(draws, minlength=n).astype(np.int32), rng


# worker state, set once per process by _init_worker
_W: dict = {}


def _init_worker(X, y, slots, weights, hp, k):
    _W.update(X=X, y=y, slots=slots, weights=weights, hp=hp, k=k)


def _grow_range(indices) -> list[Tree]:
    X, y, hp = _W["X"], _W["y"], _W["hp"]
    out = []
    for t in indices:
        mult, rng = bootstrap_counts(hp.base_seed, t, X.shape[0])
        out.append(
            grow_tree(
                X, y, mult, _W["weights"], _W["slots"],
                max_depth=hp.max_depth,
                min_samples_split=hp.min_samples_split,
                min_samples_leaf=hp.min_samples_leaf,
                features_per_split=_W["k"],
                rng=rng,
            )
        )
    return out


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None or jobs == 0:
        return 1
    if jobs < 0:
        return os.cpu_count() or 1
    return jobs


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    hp: Hyperparams | None = None,
    *,
    task: str = "oor",
    feature_set: str | None = None,
    jobs: int | None = 1,
) -> Forest:
    """Train ``hp.tree_count`` trees; output does not depend on ``jobs``."""
    hp = hp or Hyperparams()
    X = np.ascontiguousarray(X, dtype=np.uint8)
    y = np.ascontiguousarray(np.asarray(y).astype(bool), dtype=np.uint8)
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) == 0:
        raise ValueError("X must be (n, features) with n == len(y) > 0")
    if np.all(y) or not np.any(y):
        raise SingleClassInput("training labels contain a single class")
    if feature_set is None:
        feature_set = next((name for name, width in FEATURE_SETS.items() if width == X.shape[1]), "custom")
    slots = value_slots(feature_set) if feature_set != "custom" else X.max(axis=0).astype(np.int32) + 1
    slots = np.ascontiguousarray(slots, dtype=np.int32)
    weights = balanced_weights(y) if hp.class_weighting == "balanced" else (1.0, 1.0)
    k = hp.resolve_features_per_split(X.shape[1])

    jobs = min(resolve_jobs(jobs), hp.tree_count)
    indices = list(range(hp.tree_count))
    if jobs == 1:
        _init_worker(X, y, slots, weights, hp, k)
        try:
            trees = _grow_range(indices)
        finally:
            _W.clear()
    else:
        chunks = [indices[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(X, y, slots, weights, hp, k)) as ex:
            results = list(ex.map(_grow_range, chunks))
        by_index: dict[int, Tree] = {}
        for chunk, grown in zip(chunks, results):
            by_index.update(zip(chunk, grown))
        trees = [by_index[i] for i in indices]
    return Forest(trees=trees, hyperparams=hp, task=task, n_features=X.shape[1], feature_set=feature_set)


# --- persistence -----------------------------------------------------------


def forest_to_dict(f: Forest) -> dict:
    return {
        "task": f.task,
        "threshold": f.threshold,
        "n_features": f.n_features,
        "feature_set": f.feature_set,
        "hyperparams": asdict(f.hyperparams),
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in f.trees
        ],
    }


def forest_from_dict(d: dict) -> Forest:
    try:
        hp = Hyperparams(**d["hyperparams"])
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
            )
            for t in d["trees"]
        ]
        forest = Forest(
            trees=trees,
            hyperparams=hp,
            task=str(d["task"]),
            n_features=int(d["n_features"]),
            feature_set=str(d["feature_set"]),
            threshold=float(d["threshold"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed forest record: {exc}") from exc
    if len(trees) != hp.tree_count:
        raise CorruptModel(f"forest holds {len(trees)} trees, hyperparams say {hp.tree_count}")
    for t in trees:
        lengths = {len(t.feature), len(t.threshold), len(t.left), len(t.right), len(t.value)}
        if len(lengths) != 1 or not t.node_count:
            raise CorruptModel("inconsistent tree arrays")
        internal = t.feature >= 0
        if np.any(t.feature >= forest.n_features):
            raise CorruptModel("split feature out of range")
        kids = np.concatenate([t.left[internal], t.right[internal]])
        if np.any(kids <= 0) or np.any(kids >= t.node_count):
            raise CorruptModel("child index out of range")
    return forest


def pack_blob(magic: bytes, version: int, doc: dict) -> bytes:
    """``magic | version byte | sha256(payload) | payload`` with zlib-compressed JSON payload."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    payload = zlib.compress(text.encode("utf-8"), 9)
    return magic + struct.pack("B", version) + hashlib.sha256(payload).digest() + payload


def unpack_blob(data: bytes, magic: bytes, version: int) -> dict:
    head = len(magic) + 1 + 32
    if len(data) < head or data[: len(magic)] != magic:
        raise CorruptModel("not a model file (bad magic or truncated header)")
    found = data[len(magic)]
    if found != version:
        raise VersionMismatch(f"model format version {found}, this build reads {version}")
    digest, payload = data[len(magic) + 1 : head], data[head:]
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptModel("checksum mismatch (file truncated or modified)")
    try:
        return json.loads(zlib.decompress(payload).decode("utf-8"))
    except (zlib.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"undecodable payload: {exc}") from exc


def save_forest(f: Forest) -> bytes:
    return pack_blob(MODEL_MAGIC, MODEL_VERSION, forest_to_dict(f))


def load_forest(data: bytes) -> Forest:
    return forest_from_dict(unpack_blob(data, MODEL_MAGIC, MODEL_VERSION))


def with_threshold(f: Forest, threshold: float) -> Forest:
    return replace(f, threshold=threshold)
