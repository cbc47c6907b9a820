"""APB transfer reconstruction from VCD documents, and the inverse synthesis."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .vcd import UnknownIdCode, VarDecl, VcdDocument, build_document

SAMPLE_LEN = 20
WORD_MASK = 0xFFFF_FFFF

ROLES = ("PSEL", "PENABLE", "PWRITE", "PADDR", "PWDATA", "PRDATA")
OPTIONAL_ROLES = ("PREADY",)
ROLE_WIDTHS = {"PSEL": 1, "PENABLE": 1, "PWRITE": 1, "PREADY": 1, "PADDR": 32, "PWDATA": 32, "PRDATA": 32}


class ApbError(Exception):
    pass


class XInPayload(ApbError):
    pass


class ProtocolViolation(ApbError):
    pass


class MissingSignal(ApbError):
    pass


class ShortTail(ApbError):
    """Fewer than 20 transactions were left after the last full window."""

    def __init__(self, remainder: int, samples: list | None = None):
        super().__init__(f"{remainder} trailing transaction(s) do not fill a {SAMPLE_LEN}-transaction window")
        self.remainder = remainder
        self.samples = samples or []


class Label(str, enum.Enum):
    NO_ERROR = "no_error"
    OUT_OF_RANGE = "out_of_range_error"
    ADDRESS = "address_error"
    DATA_0 = "data_error_0"
    DATA_1 = "data_error_1"

    @property
    def reported(self) -> str:
        """Reporting category; the two data labels merge into ``data_error``."""
        return "data_error" if self in (Label.DATA_0, Label.DATA_1) else self.value


REPORT_CLASSES = ("out_of_range_error", "address_error", "data_error", "no_error")


@dataclass(frozen=True)
class ApbTransaction:
    address: int
    data: int
    is_write: bool = True
    # metadata only; two transfers with equal payloads compare equal
    time: int | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("address", "data"):
            v = getattr(self, name)
            if not 0 <= v <= WORD_MASK:
                raise ValueError(f"{name} {v:#x} is not a 32-bit word")

    def describe(self) -> str:
        kind = "WRITE" if self.is_write else "READ"
        return f"{kind} addr=0x{self.address:08X} data=0x{self.data:08X}"


@dataclass(frozen=True)
class Sample:
    transactions: tuple[ApbTransaction, ...]
    label: Label | None = None

    def __post_init__(self):
        object.__setattr__(self, "transactions", tuple(self.transactions))
        if len(self.transactions) != SAMPLE_LEN:
            raise ValueError(f"a sample holds exactly {SAMPLE_LEN} transactions, got {len(self.transactions)}")
        if self.label is not None:
            object.__setattr__(self, "label", Label(self.label))

    def addresses(self) -> list[int]:
        return [t.address for t in self.transactions]

    def data(self) -> list[int]:
        return [t.data for t in self.transactions]


@dataclass(frozen=True)
class SignalMap:
    bindings: dict[str, str]

    def __post_init__(self):
        missing = [r for r in ROLES if r not in self.bindings]
        if missing:
            raise MissingSignal(f"signal map lacks role(s): {', '.join(missing)}")
        unknown = set(self.bindings) - set(ROLES) - set(OPTIONAL_ROLES)
        if unknown:
            raise MissingSignal(f"unknown role(s) in signal map: {', '.join(sorted(unknown))}")

    @classmethod
    def from_json(cls, text: str) -> "SignalMap":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MissingSignal(f"signal map is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or not all(isinstance(v, str) for v in doc.values()):
            raise MissingSignal("signal map must be a flat object of role -> signal name")
        return cls(dict(doc))

    @classmethod
    def load(cls, path: str | Path) -> "SignalMap":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps(self.bindings, indent=2, sort_keys=True) + "\n"

    def resolve(self, doc: VcdDocument) -> dict[str, str]:
        """Role -> id_code, checking declared widths."""
        out = {}
        for role, name in self.bindings.items():
            try:
                var = doc.find(name)
            except UnknownIdCode:
                raise MissingSignal(f"{role} bound to {name!r}, which the dump does not declare") from None
            if var.width != ROLE_WIDTHS[role]:
                raise MissingSignal(f"{role} ({name!r}) is {var.width} bits wide, expected {ROLE_WIDTHS[role]}")
            out[role] = var.id_code
        return out


DEFAULT_SIGNAL_MAP = SignalMap(
    {
        "PSEL": "apb.PSEL",
        "PENABLE": "apb.PENABLE",
        "PWRITE": "apb.PWRITE",
        "PADDR": "apb.PADDR",
        "PWDATA": "apb.PWDATA",
        "PRDATA": "apb.PRDATA",
    }
)


def _word(bits: str, role: str, time: int) -> int:
    if "x" in bits or "z" in bits:
        raise XInPayload(f"{role} is {bits!r} at time {time}")
    return int(bits, 2)


def extract_transactions(doc: VcdDocument, smap: SignalMap) -> list[ApbTransaction]:
    """One transaction per completed APB access phase, in time order.

    Signal states are evaluated after all changes at each distinct time.
    An access starts where PENABLE rises while PSEL is 1; address and
    direction come from the latest setup point (PSEL=1, PENABLE=0), write
    data from the access start, read data from the completion point (the
    first time PREADY is 1 when PREADY is mapped, else the access start).
    """
    codes = smap.resolve(doc)
    at = doc.raw_value_at
    txns: list[ApbTransaction] = []
    setup: tuple[int, str, str] | None = None
    prev_enable = "x"
    waiting: tuple[int, str, str, int] | None = None  # (setup time, paddr, pwrite, access time)

    def finish(t_done: int, paddr: str, pwrite: str, t_setup: int, t_access: int):
        address = _word(paddr, "PADDR", t_setup)
        if pwrite not in "01":
            raise XInPayload(f"PWRITE is {pwrite!r} at time {t_setup}")
        if pwrite == "1":
            data = _word(at(codes["PWDATA"], t_access), "PWDATA", t_access)
        else:
            data = _word(at(codes["PRDATA"], t_done), "PRDATA", t_done)
        txns.append(ApbTransaction(address, data, pwrite == "1", t_done))

    for t in doc.change_times():
        psel = at(codes["PSEL"], t)
        penable = at(codes["PENABLE"], t)
        if penable == "1" and psel != "1":
            raise ProtocolViolation(f"PENABLE high while PSEL is {psel!r} at time {t}")
        if waiting is not None:
            t_setup, paddr, pwrite, t_access = waiting
            if penable != "1":
                raise ProtocolViolation(f"PENABLE dropped at time {t} before PREADY completed the transfer")
            if at(codes["PREADY"], t) == "1":
                finish(t, paddr, pwrite, t_setup, t_access)
                waiting = None
        elif penable == "1" and prev_enable != "1":
            if setup is None:
                raise ProtocolViolation(f"access phase at time {t} without a preceding setup phase")
            t_setup, paddr, pwrite = setup
            if "PREADY" in codes and at(codes["PREADY"], t) != "1":
                waiting = (t_setup, paddr, pwrite, t)
            else:
                finish(t, paddr, pwrite, t_setup, t)
            setup = None
        if psel == "1" and penable == "0":
            setup = (t, at(codes["PADDR"], t), at(codes["PWRITE"], t))
        prev_enable = penable
    if waiting is not None:
        raise ProtocolViolation(f"transfer starting at time {waiting[3]} never completed")
    return txns


def group_samples(txns: Sequence[ApbTransaction], *, strict: bool = True) -> list[Sample]:
    """Consecutive non-overlapping windows of 20.

    With ``strict`` a remainder raises ``ShortTail`` carrying the full windows
    in ``.samples``; otherwise the remainder is dropped silently.
    """
    n_full = len(txns) // SAMPLE_LEN
    samples = [Sample(tuple(txns[i * SAMPLE_LEN : (i + 1) * SAMPLE_LEN])) for i in range(n_full)]
    remainder = len(txns) - n_full * SAMPLE_LEN
    if remainder and strict:
        raise ShortTail(remainder, samples)
    return samples


def synth_waveform(
    txns: Iterable[ApbTransaction],
    smap: SignalMap = DEFAULT_SIGNAL_MAP,
    period: int = 10,
    *,
    wait_states: int = 0,
    timescale: tuple[int, str] = (1, "ns"),
) -> VcdDocument:
    """Two-phase waveform: transfer ``j`` sets up at ``2j*period`` and is
    accessed at ``(2j+1)*period``; the bus idles after the last transfer.

    With ``wait_states`` > 0 (requires PREADY in the map) PREADY is held low
    for that many periods of every access phase and each transfer occupies
    ``2 + wait_states`` periods. Signal names come from the map; dotted
    names become scopes.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    if wait_states and "PREADY" not in smap.bindings:
        raise ValueError("wait states need a PREADY binding")
    txns = list(txns)
    roles = list(ROLES) + [r for r in OPTIONAL_ROLES if r in smap.bindings]
    codes = {role: _id_code(i) for i, role in enumerate(roles)}
    vars_ = [VarDecl(codes[r], ROLE_WIDTHS[r], smap.bindings[r], "wire") for r in roles]

    def w(v: int) -> str:
        return format(v, "032b")

    changes: list[tuple[int, str, str]] = [
        (0, codes["PSEL"], "0"),
        (0, codes["PENABLE"], "0"),
        (0, codes["PWRITE"], "0"),
        (0, codes["PADDR"], w(0)),
        (0, codes["PWDATA"], w(0)),
        (0, codes["PRDATA"], w(0)),
    ]
    if "PREADY" in codes:
        changes.append((0, codes["PREADY"], "1"))
    state = {c: v for _, c, v in changes}

    def drive(t: int, role: str, value: str):
        if state[codes[role]] != value:
            changes.append((t, codes[role], value))
            state[codes[role]] = value

    slot = (2 + wait_states) * period
    for j, tx in enumerate(txns):
        t_setup = j * slot
        t_access = t_setup + period
        t_done = t_access + wait_states * period
        if j == 0:
            # fold the time-0 setup values into the initial dump
            changes.clear()
            state.clear()
            for role, value in (
                ("PSEL", "1"), ("PENABLE", "0"), ("PWRITE", "1" if tx.is_write else "0"),
                ("PADDR", w(tx.address)), ("PWDATA", w(tx.data if tx.is_write else 0)), ("PRDATA", w(0)),
            ):
                changes.append((0, codes[role], value))
                state[codes[role]] = value
            if "PREADY" in codes:
                changes.append((0, codes["PREADY"], "1"))
                state[codes["PREADY"]] = "1"
        else:
            drive(t_setup, "PSEL", "1")
            drive(t_setup, "PENABLE", "0")
            drive(t_setup, "PWRITE", "1" if tx.is_write else "0")
            drive(t_setup, "PADDR", w(tx.address))
            if tx.is_write:
                drive(t_setup, "PWDATA", w(tx.data))
        drive(t_access, "PENABLE", "1")
        if wait_states:
            drive(t_access, "PREADY", "0")
            drive(t_done, "PREADY", "1")
        if not tx.is_write:
            drive(t_done, "PRDATA", w(tx.data))
    if txns:
        t_idle = len(txns) * slot
        drive(t_idle, "PSEL", "0")
        drive(t_idle, "PENABLE", "0")
    changes.sort(key=lambda c: c[0])
    return build_document(vars_, changes, timescale)


def _id_code(i: int) -> str:
    # printable identifier codes starting at '!'
    out = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 94)
        out = chr(33 + r) + out
    return out
