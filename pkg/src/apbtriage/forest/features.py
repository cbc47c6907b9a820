"""Bit-level featurization of 20-transaction samples.

Layout for one field (address or data), ``t`` = transaction 0..19,
``b`` = bit 0..31 with bit 0 the LSB:

* ``[0, 640)``    raw bits, ``feature[t * 32 + b]``
* ``[640, 672)``  lane counts, number of transactions with bit ``b`` set
* ``[672, 703)``  pair agreement, number of transactions where bits
  ``i + 1`` and ``i`` are equal, for ``i = 0..30``
* ``703``         largest pair agreement over the 31 pairs
* ``704``         number of pairs equal in all 20 transactions

The ``bits`` feature set is the first block alone; ``lanes`` is all of them.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

N_TXNS = 20
WORD_BITS = 32
N_RAW = N_TXNS * WORD_BITS
N_PAIRS = WORD_BITS - 1

FEATURE_SETS = {
    "bits": N_RAW,
    "lanes": N_RAW + WORD_BITS + N_PAIRS + 2,
}
DEFAULT_FEATURE_SET = "lanes"

FIELDS = ("address", "data")


def n_features(feature_set: str) -> int:
    try:
        return FEATURE_SETS[feature_set]
    except KeyError:
        raise ValueError(f"unknown feature set {feature_set!r}") from None


def value_slots(feature_set: str) -> np.ndarray:
    """Number of distinct integer values each feature can take (max + 1)."""
    slots = np.full(n_features(feature_set), 2, dtype=np.int32)
    slots[N_RAW:] = N_TXNS + 1
    if len(slots) > N_RAW:
        slots[-1] = N_PAIRS + 1
    return slots


def field_words(samples: Iterable, field: str) -> np.ndarray:
    """(n, 20) uint64 matrix of the chosen field's words."""
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}, got {field!r}")
    attr = "address" if field == "address" else "data"
    rows = [[getattr(t, attr) for t in s.transactions] for s in samples]
    if not rows:
        return np.zeros((0, N_TXNS), dtype=np.uint64)
    return np.asarray(rows, dtype=np.uint64)


def words_to_features(words: np.ndarray, feature_set: str = DEFAULT_FEATURE_SET) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    if words.ndim != 2 or words.shape[1] != N_TXNS:
        raise ValueError(f"expected (n, {N_TXNS}) words, got shape {words.shape}")
    n = words.shape[0]
    shifts = np.arange(WORD_BITS, dtype=np.uint64)
    bits = ((words[:, :, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    raw = bits.reshape(n, N_RAW)
    if feature_set == "bits":
        return np.ascontiguousarray(raw)
    n_features(feature_set)
    lanes = bits.sum(axis=1, dtype=np.uint8)
    agree = (bits[:, :, 1:] == bits[:, :, :-1]).sum(axis=1, dtype=np.uint8)
    summary = np.stack([agree.max(axis=1), (agree == N_TXNS).sum(axis=1, dtype=np.uint8)], axis=1)
    return np.ascontiguousarray(np.concatenate([raw, lanes, agree, summary], axis=1))


def featurize(sample, field: str, feature_set: str = DEFAULT_FEATURE_SET) -> np.ndarray:
    return words_to_features(field_words([sample], field), feature_set)[0]


def featurize_many(samples: Sequence, field: str, feature_set: str = DEFAULT_FEATURE_SET) -> np.ndarray:
    return words_to_features(field_words(samples, field), feature_set)
