"""Reader and writer for the subset of IEEE-1364 VCD needed for bus dumps.

Supported: ``$timescale``, ``$scope``/``$upscope`` (flattened into dotted
names), ``$var``, ``$enddefinitions``, ``$dumpvars ... $end``, ``#time``,
scalar changes (``0!``) and vector changes (``b1010 !``). ``$date``,
``$version`` and ``$comment`` blocks are skipped. Real-valued changes and
other directives are rejected.

Values are kept as MSB-first strings over ``01xz``; ``FourState`` is the
public per-bit view.
"""
from __future__ import annotations

import bisect
import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence


class VcdError(Exception):
    """Base class for every error the parser can raise."""


class UnknownIdCode(VcdError):
    pass


class WidthMismatch(VcdError):
    pass


class MalformedDirective(VcdError):
    pass


class NonMonotonicTime(VcdError):
    pass


class FourState(str, enum.Enum):
    ZERO = "0"
    ONE = "1"
    X = "x"
    Z = "z"


_STATE_CHARS = frozenset("01xz")
_TIMESCALE_RE = re.compile(r"^(1|10|100)\s*(s|ms|us|ns|ps|fs)$")
_SKIPPED_BLOCKS = {"$date", "$version", "$comment"}
_KEYWORDS = frozenset(
    "$date $version $comment $timescale $scope $upscope $var $enddefinitions "
    "$dumpvars $dumpall $dumpon $dumpoff".split()
)
_UINT_RE = re.compile(r"[0-9]+")
MAX_WIDTH = 4096


@dataclass(frozen=True)
class VarDecl:
    id_code: str
    width: int
    reference: str
    var_kind: str = "wire"

    def __post_init__(self):
        if self.width < 1:
            raise MalformedDirective(f"$var {self.reference!r} has width {self.width}")
        if not self.id_code or any(not (33 <= ord(c) <= 126) for c in self.id_code):
            raise MalformedDirective(f"identifier code {self.id_code!r} is not printable ASCII")


@dataclass(frozen=True)
class ValueChange:
    time: int
    id_code: str
    value: str  # MSB-first over "01xz", already extended to the declared width

    @property
    def states(self) -> tuple[FourState, ...]:
        return tuple(FourState(c) for c in self.value)


def extend_value(bits: str, width: int) -> str:
    """Left-extend a vector literal: 0/1 lead pads with 0, x/z lead replicates."""
    bits = bits.lower()
    if len(bits) > width:
        raise WidthMismatch(f"value of {len(bits)} bits for a {width}-bit variable")
    if len(bits) == width:
        return bits
    pad = bits[0] if bits[0] in "xz" else "0"
    return pad * (width - len(bits)) + bits


@dataclass(frozen=True)
class VcdDocument:
    timescale: tuple[int, str]
    vars: tuple[VarDecl, ...]
    changes: tuple[ValueChange, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "changes", tuple(self.changes))
        widths: dict[str, int] = {}
        for v in self.vars:
            if widths.setdefault(v.id_code, v.width) != v.width:
                raise MalformedDirective(f"identifier {v.id_code!r} declared with two widths")
        last = 0
        for c in self.changes:
            if c.time < last:
                raise NonMonotonicTime(f"change at time {c.time} follows time {last}")
            last = c.time
            if c.id_code not in widths:
                raise UnknownIdCode(f"change references undeclared identifier {c.id_code!r}")
            if len(c.value) != widths[c.id_code] or not set(c.value) <= _STATE_CHARS:
                raise WidthMismatch(f"value {c.value!r} does not fit {widths[c.id_code]}-bit {c.id_code!r}")
        index: dict[str, tuple[list[int], list[str]]] = {code: ([], []) for code in widths}
        for c in self.changes:
            times, values = index[c.id_code]
            times.append(c.time)
            values.append(c.value)
        object.__setattr__(self, "_index", {"widths": widths, "series": index})

    def width_of(self, id_code: str) -> int:
        try:
            return self._index["widths"][id_code]
        except KeyError:
            raise UnknownIdCode(f"undeclared identifier {id_code!r}") from None

    def raw_value_at(self, id_code: str, time: int) -> str:
        width = self.width_of(id_code)
        times, values = self._index["series"][id_code]
        i = bisect.bisect_right(times, time)
        return values[i - 1] if i else "x" * width

    def series(self, id_code: str) -> tuple[list[int], list[str]]:
        self.width_of(id_code)
        return self._index["series"][id_code]

    def change_times(self) -> list[int]:
        return sorted({c.time for c in self.changes})

    def find(self, name: str) -> VarDecl:
        """Variable by identifier code or by full dotted reference."""
        for v in self.vars:
            if v.id_code == name:
                return v
        for v in self.vars:
            if v.reference == name:
                return v
        raise UnknownIdCode(f"no variable with identifier or name {name!r}")


def signal_value_at(doc: VcdDocument, id_code: str, time: int) -> tuple[FourState, ...]:
    """Value held at ``time``: the latest change at or before it, all-X before the first."""
    return tuple(FourState(c) for c in doc.raw_value_at(id_code, time))


def _tokens(text: str) -> Iterator[str]:
    for line in text.splitlines():
        yield from line.split()


def parse_vcd(text: str) -> VcdDocument:
    toks = _tokens(text)
    timescale = (1, "ns")
    scope: list[str] = []
    vars_: list[VarDecl] = []
    widths: dict[str, int] = {}

    def block(opener: str) -> list[str]:
        body = []
        for tok in toks:
            if tok == "$end":
                return body
            if tok in _KEYWORDS:
                raise MalformedDirective(f"{opener} interrupted by {tok}")
            body.append(tok)
        raise MalformedDirective(f"unterminated {opener}")

    for tok in toks:
        if tok == "$enddefinitions":
            if block(tok):
                raise MalformedDirective("$enddefinitions takes no arguments")
            break
        if tok in _SKIPPED_BLOCKS:
            for inner in toks:
                if inner == "$end":
                    break
            else:
                raise MalformedDirective(f"unterminated {tok}")
        elif tok == "$timescale":
            m = _TIMESCALE_RE.match(" ".join(block(tok)))
            if not m:
                raise MalformedDirective("bad $timescale")
            timescale = (int(m.group(1)), m.group(2))
        elif tok == "$scope":
            body = block(tok)
            if len(body) != 2:
                raise MalformedDirective("$scope needs a kind and a name")
            scope.append(body[1])
        elif tok == "$upscope":
            if block(tok) or not scope:
                raise MalformedDirective("unbalanced $upscope")
            scope.pop()
        elif tok == "$var":
            body = block(tok)
            if len(body) not in (4, 5):
                raise MalformedDirective(f"$var expects kind, width, id, name [range], got {body}")
            kind, width_text, code, name = body[:4]
            if not _UINT_RE.fullmatch(width_text) or int(width_text) > MAX_WIDTH:
                raise MalformedDirective(f"$var width {width_text!r} is not an integer in 1..{MAX_WIDTH}")
            decl = VarDecl(code, int(width_text), ".".join(scope + [name]), kind)
            if widths.setdefault(code, decl.width) != decl.width:
                raise MalformedDirective(f"identifier {code!r} redeclared with a different width")
            vars_.append(decl)
        else:
            raise MalformedDirective(f"unexpected {tok!r} in header")
    else:
        raise MalformedDirective("missing $enddefinitions")

    changes: list[ValueChange] = []
    now = 0
    in_dump = False
    pending_vector: str | None = None
    for tok in toks:
        if pending_vector is not None:
            changes.append(_vector_change(now, pending_vector, tok, widths))
            pending_vector = None
        elif tok.startswith("#"):
            if not _UINT_RE.fullmatch(tok[1:]):
                raise MalformedDirective(f"bad timestamp {tok!r}")
            t = int(tok[1:])
            if t < now:
                raise NonMonotonicTime(f"time {t} follows time {now}")
            now = t
        elif tok == "$dumpvars":
            if in_dump:
                raise MalformedDirective("nested $dumpvars")
            in_dump = True
        elif tok == "$end":
            if not in_dump:
                raise MalformedDirective("stray $end")
            in_dump = False
        elif tok[0] in "bB":
            pending_vector = tok[1:]
        elif tok[0] in "01xzXZ":
            code = tok[1:]
            if not code:
                raise MalformedDirective(f"scalar change {tok!r} without identifier")
            if code not in widths:
                raise UnknownIdCode(f"change references undeclared identifier {code!r}")
            changes.append(ValueChange(now, code, extend_value(tok[0], widths[code])))
        else:
            raise MalformedDirective(f"unsupported token {tok!r}")
    if pending_vector is not None:
        raise MalformedDirective("vector change without identifier")
    if in_dump:
        raise MalformedDirective("unterminated $dumpvars")
    return VcdDocument(timescale, tuple(vars_), tuple(changes))


def _vector_change(time: int, bits: str, code: str, widths: dict[str, int]) -> ValueChange:
    if not bits or not set(bits.lower()) <= _STATE_CHARS:
        raise MalformedDirective(f"bad vector literal b{bits}")
    if code not in widths:
        raise UnknownIdCode(f"change references undeclared identifier {code!r}")
    return ValueChange(time, code, extend_value(bits, widths[code]))


def emit_vcd(doc: VcdDocument) -> str:
    out = [f"$timescale {doc.timescale[0]}{doc.timescale[1]} $end"]
    open_scope: list[str] = []
    for v in doc.vars:
        *path, name = v.reference.split(".")
        common = 0
        while common < min(len(path), len(open_scope)) and path[common] == open_scope[common]:
            common += 1
        for _ in range(len(open_scope) - common):
            out.append("$upscope $end")
        for part in path[common:]:
            out.append(f"$scope module {part} $end")
        open_scope = path
        out.append(f"$var {v.var_kind} {v.width} {v.id_code} {name} $end")
    for _ in open_scope:
        out.append("$upscope $end")
    out.append("$enddefinitions $end")

    widths = {v.id_code: v.width for v in doc.vars}
    now = None
    for c in doc.changes:
        if c.time != now:
            out.append(f"#{c.time}")
            now = c.time
        if widths[c.id_code] == 1:
            out.append(f"{c.value}{c.id_code}")
        else:
            out.append(f"b{c.value} {c.id_code}")
    return "\n".join(out) + "\n"


def vars_by_reference(doc: VcdDocument) -> dict[str, VarDecl]:
    return {v.reference: v for v in doc.vars}


def build_document(
    vars: Sequence[VarDecl],
    changes: Sequence[tuple[int, str, str]],
    timescale: tuple[int, str] = (1, "ns"),
) -> VcdDocument:
    """Document from ``(time, id_code, bits)`` triples; bits are extended per declared width."""
    widths = {v.id_code: v.width for v in vars}
    built = []
    for time, code, bits in changes:
        if code not in widths:
            raise UnknownIdCode(f"change references undeclared identifier {code!r}")
        built.append(ValueChange(time, code, extend_value(bits, widths[code])))
    return VcdDocument(timescale, tuple(vars), tuple(built))
