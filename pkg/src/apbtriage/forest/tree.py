"""Single decision tree growth on small-integer features.

Trees are stored as flat parallel arrays. Node ``i`` is a leaf when
``feature[i] == -1``; otherwise samples with ``x[feature[i]] <= threshold[i]``
go to ``left[i]`` and the rest to ``right[i]``. ``value[i]`` is the
class-weighted positive fraction of the training rows that reached the node.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels


class EmptyPartition(ValueError):
    pass


def gini(w_neg: float, w_pos: float) -> float:
    total = w_neg + w_pos
    if not total > 0:
        raise EmptyPartition("gini impurity of an empty partition")
    p0 = w_neg / total
    p1 = w_pos / total
    return 1.0 - p0 * p0 - p1 * p1


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, x: np.ndarray) -> int:
        """Index of the leaf reached by one feature vector."""
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(node)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("feature", "threshold", "left", "right", "value")
        )

    __hash__ = None


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    rows: Sequence[int],
    features: Sequence[int],
    *,
    multiplicity: np.ndarray | None = None,
    class_weights: tuple[float, float] = (1.0, 1.0),
    min_samples_leaf: int = 1,
    value_slots: np.ndarray | None = None,
):
    """Best Gini split of ``rows`` over the candidate ``features``.

    Returns ``(feature, threshold, decrease)`` or ``None``. ``decrease`` is the
    impurity drop per unit of node weight. Candidates within 1e-12 of the best
    decrease resolve to the lowest feature index, then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.uint8)
    y = np.ascontiguousarray(y, dtype=np.uint8)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    feats = np.ascontiguousarray(np.sort(np.asarray(features, dtype=np.int64)))
    if multiplicity is None:
        multiplicity = np.ones(X.shape[0], dtype=np.int32)
    mult = np.ascontiguousarray(multiplicity, dtype=np.int32)
    if value_slots is None:
        value_slots = (X.max(axis=0).astype(np.int32) + 1) if X.size else np.ones(X.shape[1], np.int32)
    slots = np.ascontiguousarray(value_slots, dtype=np.int32)
    if len(rows) == 0 or len(feats) == 0:
        return None
    w0, w1 = (float(w) for w in class_weights)
    return kernels().best_split(X, rows, mult, y, feats, slots, w0, w1, int(min_samples_leaf))


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    multiplicity: np.ndarray,
    class_weights: tuple[float, float],
    value_slots: np.ndarray,
    *,
    max_depth: int,
    min_samples_split: int,
    min_samples_leaf: int,
    features_per_split: int,
    rng: np.random.Generator,
) -> Tree:
    """Greedy depth-first growth; left subtrees are expanded before right ones.

    ``X``, ``y``, ``multiplicity`` and ``value_slots`` must already be
    contiguous arrays of dtype uint8, uint8, int32 and int32.
    """
    kern = kernels()
    w0, w1 = class_weights
    n_total_features = X.shape[1]

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root_rows = np.flatnonzero(multiplicity > 0).astype(np.int64)
    stack = [(new_node(), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        m = multiplicity[rows].astype(np.int64)
        n = int(m.sum())
        n1 = int((m * y[rows]).sum())
        n0 = n - n1
        value[node] = (w1 * n1) / (w0 * n0 + w1 * n1)
        if depth >= max_depth or n < min_samples_split or n0 == 0 or n1 == 0:
            continue
        feats = np.sort(rng.choice(n_total_features, size=features_per_split, replace=False)).astype(np.int64)
        split = kern.best_split(X, rows, multiplicity, y, feats, value_slots, w0, w1, min_samples_leaf)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[rows, f] <= thr
        lnode = new_node()
        rnode = new_node()
        feature[node] = f
        threshold[node] = thr
        left[node] = lnode
        right[node] = rnode
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )
