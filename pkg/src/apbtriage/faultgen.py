"""Synthetic labeled corpora: clean APB samples plus three injected fault models.

* out-of-range access: k ~ U{1..20} addresses replaced by draws from outside
  the address map
* address short: one adjacent address-bit pair wired-OR'ed in every transfer
* data stuck: one adjacent data-bit pair forced to 00 or 11 in every transfer

All randomness comes from ``numpy.random.SeedSequence(seed, spawn_key=...)``
substreams, one per sample index, so output does not depend on how the
index space is partitioned.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .apb import SAMPLE_LEN, WORD_MASK, ApbTransaction, Label, Sample

FORMAT_NAME = "apbtriage-dataset"
FORMAT_VERSION = 1
N_PAIRS = 31
PAIR_00 = "00"
PAIR_11 = "11"
PAIR_MIXED = "EQUAL-MIXED"
_SHORT_REDRAWS = 64

LABEL_ORDER = (Label.NO_ERROR, Label.OUT_OF_RANGE, Label.ADDRESS, Label.DATA_0, Label.DATA_1)


class FaultgenError(Exception):
    pass


class MapCoversFullSpace(FaultgenError):
    pass


class DatasetFormatError(FaultgenError):
    pass


@dataclass(frozen=True)
class AddressMap:
    """Valid completer ranges, inclusive on both ends."""

    ranges: tuple[tuple[int, int], ...] = ((0x0000_0000, 0x7FFF_FFFF),)

    def __post_init__(self):
        rs = tuple(sorted((int(b), int(e)) for b, e in self.ranges))
        if not rs:
            raise ValueError("address map needs at least one range")
        for base, last in rs:
            if not 0 <= base <= last <= WORD_MASK:
                raise ValueError(f"bad range [{base:#x}, {last:#x}]")
        for (_, last), (base, _) in zip(rs, rs[1:]):
            if base <= last:
                raise ValueError("address ranges overlap")
        object.__setattr__(self, "ranges", rs)

    def contains(self, address: int) -> bool:
        return any(base <= address <= last for base, last in self.ranges)

    def complement(self) -> tuple[tuple[int, int], ...]:
        out = []
        nxt = 0
        for base, last in self.ranges:
            if base > nxt:
                out.append((nxt, base - 1))
            nxt = last + 1
        if nxt <= WORD_MASK:
            out.append((nxt, WORD_MASK))
        return tuple(out)

    def to_dict(self) -> dict:
        return {"ranges": [[f"0x{b:08X}", f"0x{e:08X}"] for b, e in self.ranges]}

    @classmethod
    def from_dict(cls, d: dict) -> "AddressMap":
        return cls(tuple((int(b, 16), int(e, 16)) for b, e in d["ranges"]))


def _draw_from(ranges: Sequence[tuple[int, int]], rng: np.random.Generator, size: int) -> np.ndarray:
    sizes = np.array([last - base + 1 for base, last in ranges], dtype=np.int64)
    bases = np.array([base for base, _ in ranges], dtype=np.int64)
    ends = np.cumsum(sizes)
    offsets = rng.integers(0, int(ends[-1]), size=size)
    which = np.searchsorted(ends, offsets, side="right")
    return bases[which] + offsets - (ends[which] - sizes[which])


def gen_clean_sample(rng: np.random.Generator, amap: AddressMap | None = None, read_fraction: float = 0.0) -> Sample:
    amap = amap or AddressMap()
    addrs = _draw_from(amap.ranges, rng, SAMPLE_LEN)
    data = rng.integers(0, 1 << 32, size=SAMPLE_LEN)
    writes = rng.random(SAMPLE_LEN) >= read_fraction
    return Sample(
        tuple(ApbTransaction(int(a), int(d), bool(w)) for a, d, w in zip(addrs, data, writes)),
        Label.NO_ERROR,
    )


def _with(s: Sample, label: Label, addrs=None, data=None) -> Sample:
    addrs = s.addresses() if addrs is None else addrs
    data = s.data() if data is None else data
    return Sample(
        tuple(ApbTransaction(int(a), int(d), t.is_write) for a, d, t in zip(addrs, data, s.transactions)),
        label,
    )


def inject_out_of_range(s: Sample, amap: AddressMap, rng: np.random.Generator) -> Sample:
    outside = amap.complement()
    if not outside:
        raise MapCoversFullSpace("the address map covers every 32-bit address")
    k = int(rng.integers(1, SAMPLE_LEN + 1))
    which = rng.choice(SAMPLE_LEN, size=k, replace=False)
    addrs = s.addresses()
    for i, a in zip(which, _draw_from(outside, rng, k)):
        addrs[int(i)] = int(a)
    return _with(s, Label.OUT_OF_RANGE, addrs=addrs)


def wired_or(word: int, pair: int) -> int:
    """Both bits of pair (pair+1, pair) take the OR of their driven values."""
    mask = 3 << pair
    bit = ((word >> pair) | (word >> (pair + 1))) & 1
    return (word & ~mask) | (mask if bit else 0)


def force_pair(word: int, pair: int, pattern: str) -> int:
    mask = 3 << pair
    return (word | mask) if pattern == PAIR_11 else (word & ~mask & WORD_MASK)


def inject_address_short(
    s: Sample, rng: np.random.Generator, amap: AddressMap | None = None, pair: int | None = None
) -> Sample:
    """Wired-OR bridge on one adjacent address pair, fixed for all 20 transfers.

    With ``amap`` given, pairs whose short would push an address outside the
    map are redrawn, so the sample stays an address fault and not an
    out-of-range one.
    """
    addrs = s.addresses()
    for _ in range(_SHORT_REDRAWS):
        i = int(rng.integers(0, N_PAIRS)) if pair is None else pair
        shorted = [wired_or(a, i) for a in addrs]
        if amap is None or all(amap.contains(a) for a in shorted):
            return _with(s, Label.ADDRESS, addrs=shorted)
        if pair is not None:
            break
    raise FaultgenError("no address pair keeps the shorted sample inside the address map")


def inject_data_stuck(s: Sample, rng: np.random.Generator, pattern: str, pair: int | None = None) -> Sample:
    if pattern not in (PAIR_00, PAIR_11):
        raise ValueError(f"pattern must be '00' or '11', got {pattern!r}")
    i = int(rng.integers(0, N_PAIRS)) if pair is None else pair
    data = [force_pair(d, i, pattern) for d in s.data()]
    return _with(s, Label.DATA_0 if pattern == PAIR_00 else Label.DATA_1, data=data)


def pair_masks(words: Iterable[int]) -> tuple[int, int, int]:
    """(equal, all-00, all-11) bitmasks over the 31 adjacent pairs; bit i is pair (i+1, i)."""
    low = (1 << N_PAIRS) - 1
    equal = zeros = ones = low
    for w in words:
        hi = w >> 1
        equal &= ~(w ^ hi)
        zeros &= ~(w | hi)
        ones &= w & hi
    return equal & low, zeros & low, ones & low


def stuck_pair_oracle(s: Sample, field: str) -> tuple[int, str] | None:
    """Lowest adjacent pair whose two bits agree in every transfer, with its pattern."""
    if field not in ("address", "data"):
        raise ValueError(f"field must be 'address' or 'data', got {field!r}")
    words = s.addresses() if field == "address" else s.data()
    equal, zeros, ones = pair_masks(words)
    if not equal:
        return None
    i = (equal & -equal).bit_length() - 1
    if zeros >> i & 1:
        return i, PAIR_00
    if ones >> i & 1:
        return i, PAIR_11
    return i, PAIR_MIXED


def rule_based_label(s: Sample, amap: AddressMap | None = None) -> Label:
    """Deterministic non-learned diagnosis from the fault signatures alone."""
    amap = amap or AddressMap()
    if not all(amap.contains(a) for a in s.addresses()):
        return Label.OUT_OF_RANGE
    _, zeros, ones = pair_masks(s.data())
    if zeros:
        return Label.DATA_0
    if ones:
        return Label.DATA_1
    if stuck_pair_oracle(s, "address") is not None:
        return Label.ADDRESS
    return Label.NO_ERROR


# --- datasets ----------------------------------------------------------------


@dataclass(frozen=True)
class GenSpec:
    counts: dict[Label, int]
    seed: int = 42
    address_map: AddressMap = field(default_factory=AddressMap)
    read_fraction: float = 0.0
    oor_txn_count_policy: str = "uniform 1..20"

    def __post_init__(self):
        counts = {Label(k): int(v) for k, v in self.counts.items()}
        if any(v < 0 for v in counts.values()):
            raise ValueError("label counts must be non-negative")
        if sum(counts.values()) <= 0:
            raise ValueError("a dataset needs at least one sample")
        if not 0.0 <= self.read_fraction <= 1.0:
            raise ValueError("read_fraction must lie in [0, 1]")
        if self.oor_txn_count_policy != "uniform 1..20":
            raise ValueError(f"unsupported out-of-range policy {self.oor_txn_count_policy!r}")
        object.__setattr__(self, "counts", {lab: counts.get(lab, 0) for lab in LABEL_ORDER})

    @classmethod
    def per_label(cls, n: int, **kw) -> "GenSpec":
        return cls({lab: n for lab in LABEL_ORDER}, **kw)

    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "counts": {lab.value: n for lab, n in self.counts.items()},
            "seed": self.seed,
            "address_map": self.address_map.to_dict(),
            "read_fraction": self.read_fraction,
            "oor_txn_count_policy": self.oor_txn_count_policy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        return cls(
            counts={Label(k): v for k, v in d["counts"].items()},
            seed=int(d["seed"]),
            address_map=AddressMap.from_dict(d["address_map"]),
            read_fraction=float(d["read_fraction"]),
            oor_txn_count_policy=d["oor_txn_count_policy"],
        )


@dataclass
class Dataset:
    samples: list[Sample]
    spec: GenSpec | None = None
    format_version: int = FORMAT_VERSION

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> list[Label]:
        return [s.label for s in self.samples]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], self.spec, self.format_version)

    def split(self, train_fraction: float = 0.8) -> tuple["Dataset", "Dataset"]:
        """Head/tail split; generated datasets are already shuffled."""
        cut = int(round(len(self.samples) * train_fraction))
        return self.subset(range(cut)), self.subset(range(cut, len(self.samples)))


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, index)))


def generate_sample(spec: GenSpec, label: Label, index: int) -> Sample:
    rng = sample_rng(spec.seed, index)
    s = gen_clean_sample(rng, spec.address_map, spec.read_fraction)
    if label is Label.OUT_OF_RANGE:
        return inject_out_of_range(s, spec.address_map, rng)
    if label is Label.ADDRESS:
        return inject_address_short(s, rng, spec.address_map)
    if label is Label.DATA_0:
        return inject_data_stuck(s, rng, PAIR_00)
    if label is Label.DATA_1:
        return inject_data_stuck(s, rng, PAIR_11)
    return s


def generate_dataset(spec: GenSpec) -> Dataset:
    labels = [lab for lab in LABEL_ORDER for _ in range(spec.counts[lab])]
    samples = [generate_sample(spec, lab, j) for j, lab in enumerate(labels)]
    order = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1,))).permutation(len(samples))
    return Dataset([samples[int(i)] for i in order], spec)


# --- JSON-Lines I/O --------------------------------------------------------------


def sample_to_record(s: Sample) -> dict:
    return {
        "label": s.label.value if s.label is not None else None,
        "txns": [{"addr": f"0x{t.address:08X}", "data": f"0x{t.data:08X}", "w": t.is_write} for t in s.transactions],
    }


def sample_from_record(rec: dict) -> Sample:
    txns = tuple(ApbTransaction(int(t["addr"], 16), int(t["data"], 16), bool(t["w"])) for t in rec["txns"])
    return Sample(txns, Label(rec["label"]) if rec.get("label") is not None else None)


def dataset_to_jsonl(ds: Dataset) -> str:
    header = {"format": FORMAT_NAME, "version": ds.format_version, "seed": ds.spec.seed if ds.spec else None,
              "spec": ds.spec.to_dict() if ds.spec else None}
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(sample_to_record(s)) for s in ds.samples)
    return "\n".join(lines) + "\n"


def dataset_from_jsonl(text: str) -> Dataset:
    lines = text.splitlines()
    try:
        header = json.loads(lines[0])
        if header.get("format") != FORMAT_NAME:
            raise DatasetFormatError("not an apbtriage dataset (missing format header)")
        if header.get("version") != FORMAT_VERSION:
            raise DatasetFormatError(f"dataset format version {header.get('version')}, expected {FORMAT_VERSION}")
        spec = GenSpec.from_dict(header["spec"]) if header.get("spec") else None
        samples = [sample_from_record(json.loads(line)) for line in lines[1:] if line.strip()]
    except DatasetFormatError:
        raise
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"malformed dataset: {exc}") from exc
    return Dataset(samples, spec)


def write_atomic(path: str | Path, data: str | bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8") if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_dataset(ds: Dataset, path: str | Path) -> None:
    write_atomic(path, dataset_to_jsonl(ds))


def read_dataset(path: str | Path) -> Dataset:
    return dataset_from_jsonl(Path(path).read_text())
