"""Brute-force oracles and random generators shared by the unit and acceptance tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from apbtriage.apb import ApbTransaction
from apbtriage.forest import balanced_weights
from apbtriage.vcd import ValueChange, VarDecl, VcdDocument


TIE_EPS = Fraction(1, 10**12)


def _gini_exact(a: Fraction, b: Fraction) -> Fraction:
    t = a + b
    return 1 - (a / t) ** 2 - (b / t) ** 2


def oracle_split(X, y, rows, feats, mult, w, min_leaf, slots):
    """Exhaustive split enumeration in exact arithmetic.

    Ties use the documented tolerance: the lowest (feature, value) whose
    decrease is within 1e-12 of the maximum wins, and a decrease must exceed
    1e-12. Class weights are floats, so candidates that tie under the ideal
    rational weights can differ by ~1e-17 here.
    """
    w0, w1 = Fraction(w[0]), Fraction(w[1])
    c0 = sum(int(mult[r]) for r in rows if y[r] == 0)
    c1 = sum(int(mult[r]) for r in rows if y[r] == 1)
    W = w0 * c0 + w1 * c1
    parent = _gini_exact(w0 * c0, w1 * c1)
    cands = []
    for f in sorted(feats):
        for v in range(int(slots[f]) - 1):
            l0 = sum(int(mult[r]) for r in rows if y[r] == 0 and X[r, f] <= v)
            l1 = sum(int(mult[r]) for r in rows if y[r] == 1 and X[r, f] <= v)
            r0, r1 = c0 - l0, c1 - l1
            if l0 + l1 < min_leaf or r0 + r1 < min_leaf:
                continue
            WL, WR = w0 * l0 + w1 * l1, w0 * r0 + w1 * r1
            dec = parent - WL / W * _gini_exact(w0 * l0, w1 * l1) - WR / W * _gini_exact(w0 * r0, w1 * r1)
            if dec > TIE_EPS:
                cands.append((dec, f, v))
    if not cands:
        return None
    best = max(c[0] for c in cands)
    dec, f, v = next(c for c in cands if c[0] >= best - TIE_EPS)
    return f, v + 0.5, dec


def random_split_instance(rng: np.random.Generator):
    """At most 8 rows x 4 features, small-integer values, bootstrap-style multiplicities."""
    while True:
        n = int(rng.integers(1, 9))
        F = int(rng.integers(1, 5))
        slots = rng.integers(2, 5, size=F).astype(np.int32)
        X = np.stack([rng.integers(0, s, size=n) for s in slots], axis=1).astype(np.uint8)
        y = rng.integers(0, 2, size=n).astype(np.uint8)
        mult = rng.integers(0, 4, size=n).astype(np.int32)
        rows = np.flatnonzero(mult > 0)
        if len(rows):
            break
    feats = np.sort(rng.choice(F, size=int(rng.integers(1, F + 1)), replace=False))
    w = balanced_weights(y) if rng.random() < 0.5 and 0 < y.sum() < n else (1.0, 1.0)
    return dict(X=X, y=y, rows=rows, feats=feats, mult=mult, w=w, min_leaf=int(rng.integers(1, 4)), slots=slots)


def auc_oracle(scores, labels) -> float:
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def random_auc_instance(rng: np.random.Generator, coarse: bool):
    n = int(rng.integers(2, 101))
    labels = rng.integers(0, 2, size=n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    scores = rng.integers(0, 8, size=n) / 8 if coarse else rng.random(n)
    return scores, labels


def random_txns(rng: np.random.Generator, n: int, read_share: float = 0.3) -> list[ApbTransaction]:
    addrs = rng.integers(0, 1 << 32, n)
    data = rng.integers(0, 1 << 32, n)
    writes = rng.random(n) >= read_share
    return [ApbTransaction(int(a), int(d), bool(w)) for a, d, w in zip(addrs, data, writes)]


_NAME_CHARS = "abcdefghijklmnopqrstuvwxyz_0123456789"


def _name(rng) -> str:
    return "abcdefghij"[int(rng.integers(10))] + "".join(
        _NAME_CHARS[int(i)] for i in rng.integers(0, len(_NAME_CHARS), int(rng.integers(0, 6)))
    )


def random_document(rng: np.random.Generator) -> VcdDocument:
    n_vars = int(rng.integers(1, 7))
    codes: list[str] = []
    while len(codes) < n_vars:
        code = "".join(chr(int(c)) for c in rng.integers(33, 127, int(rng.integers(1, 4))))
        if not code.startswith("$") and code not in codes:
            codes.append(code)
    vars_ = []
    for i, code in enumerate(codes):
        path = [_name(rng) for _ in range(int(rng.integers(0, 3)))]
        vars_.append(VarDecl(code, int(rng.integers(1, 41)), ".".join(path + [f"s{i}"]), ("wire", "reg")[i % 2]))
    times = np.sort(rng.integers(0, 10_000, int(rng.integers(0, 31))))
    changes = []
    for t in times:
        v = vars_[int(rng.integers(n_vars))]
        changes.append(ValueChange(int(t), v.id_code, "".join("01xz"[int(k)] for k in rng.integers(0, 4, v.width))))
    unit = ("s", "ms", "us", "ns", "ps", "fs")[int(rng.integers(6))]
    return VcdDocument((int(rng.choice([1, 10, 100])), unit), tuple(vars_), tuple(changes))
