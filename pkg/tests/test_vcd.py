from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apbtriage.vcd import (
    FourState,
    MalformedDirective,
    NonMonotonicTime,
    UnknownIdCode,
    ValueChange,
    VarDecl,
    VcdDocument,
    WidthMismatch,
    build_document,
    emit_vcd,
    extend_value,
    parse_vcd,
    signal_value_at,
)

MINIMAL = """$timescale 1ns $end
$scope module top $end
$var wire 1 ! clk $end
$upscope $end
$enddefinitions $end
#0
0!
#10
1!
"""


def test_minimal_scalar_dump():
    doc = parse_vcd(MINIMAL)
    assert len(doc.vars) == 1
    assert doc.vars[0] == VarDecl("!", 1, "top.clk", "wire")
    assert [(c.time, c.value) for c in doc.changes] == [(0, "0"), (10, "1")]


def test_vector_left_zero_extension():
    text = "$var wire 32 # PADDR $end\n$enddefinitions $end\n#0\nb10001010 #\n"
    doc = parse_vcd(text)
    assert int(doc.raw_value_at("#", 0), 2) == 0x8A
    assert len(doc.raw_value_at("#", 0)) == 32


def test_unknown_states_preserved():
    doc = parse_vcd("$var wire 4 a v $end\n$enddefinitions $end\n#0\nbxx10 a\n")
    assert signal_value_at(doc, "a", 0) == (FourState.X, FourState.X, FourState.ONE, FourState.ZERO)


@pytest.mark.parametrize(
    "bits,width,expected",
    [("1", 4, "0001"), ("01", 4, "0001"), ("x1", 4, "xxx1"), ("z", 3, "zzz"), ("1010", 4, "1010"), ("X0", 3, "xx0")],
)
def test_extend_value(bits, width, expected):
    assert extend_value(bits, width) == expected


def test_extend_value_too_wide():
    with pytest.raises(WidthMismatch):
        extend_value("10101", 4)


def test_value_at_semantics():
    doc = parse_vcd(MINIMAL.replace("#0\n0!\n", "#5\n0!\n"))
    assert signal_value_at(doc, "!", 0) == (FourState.X,)
    assert signal_value_at(doc, "!", 5) == (FourState.ZERO,)
    assert signal_value_at(doc, "!", 7) == (FourState.ZERO,)
    assert signal_value_at(doc, "!", 10) == (FourState.ONE,)
    assert signal_value_at(doc, "!", 10_000) == (FourState.ONE,)
    with pytest.raises(UnknownIdCode):
        signal_value_at(doc, "?", 0)


def test_empty_change_list_emits_header_only():
    doc = VcdDocument((1, "ns"), (VarDecl("!", 1, "a"),), ())
    text = emit_vcd(doc)
    assert text.rstrip().endswith("$enddefinitions $end")
    assert "#" not in text
    assert parse_vcd(text) == doc


def test_non_monotonic_construction_rejected():
    with pytest.raises(NonMonotonicTime):
        build_document([VarDecl("!", 1, "a")], [(10, "!", "1"), (0, "!", "0")])


def test_non_monotonic_parse_rejected():
    with pytest.raises(NonMonotonicTime):
        parse_vcd("$var wire 1 ! a $end\n$enddefinitions $end\n#10\n1!\n#0\n0!\n")


@pytest.mark.parametrize(
    "text,exc",
    [
        ("$var wire 1 ! a $end\n$enddefinitions $end\n#0\n1?\n", UnknownIdCode),
        ("$var wire 1 ! a $end\n$enddefinitions $end\n#0\nb1 ?\n", UnknownIdCode),
        ("$var wire 2 ! a $end\n$enddefinitions $end\n#0\nb101 !\n", WidthMismatch),
        ("$var wire 1 ! a\n$enddefinitions $end\n", MalformedDirective),
        ("$var wire 1 ! a $end\n", MalformedDirective),
        ("$timescale 3ns $end\n$enddefinitions $end\n", MalformedDirective),
        ("$var wire 0 ! a $end\n$enddefinitions $end\n", MalformedDirective),
        ("$var wire -1 ! a $end\n$enddefinitions $end\n", MalformedDirective),
        ("$upscope $end\n$enddefinitions $end\n", MalformedDirective),
        ("$var wire 1 ! a $end\n$enddefinitions $end\n#x\n", MalformedDirective),
        ("$var wire 1 ! a $end\n$enddefinitions $end\n#0\nb1\n", MalformedDirective),
        ("$var wire 1 ! a $end\n$var wire 2 ! b $end\n$enddefinitions $end\n", MalformedDirective),
        ("$var wire 1 ! a $end\n$enddefinitions $end\n$dumpvars 1!\n", MalformedDirective),
    ],
)
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_vcd(text)


def test_skipped_blocks_and_dumpvars():
    text = (
        "$date today $end\n$version sim 1.0 $end\n$comment any $var text $end\n"
        "$timescale 10 ps $end\n$var reg 3 $ bus [2:0] $end\n$enddefinitions $end\n"
        "$dumpvars\nbx $\n$end\n#4\nb11 $\n"
    )
    doc = parse_vcd(text)
    assert doc.timescale == (10, "ps")
    assert doc.raw_value_at("$", 0) == "xxx"
    assert doc.raw_value_at("$", 4) == "011"


def test_aliases_share_a_series():
    doc = parse_vcd("$var wire 1 ! a $end\n$var wire 1 ! b $end\n$enddefinitions $end\n#0\n1!\n")
    assert doc.find("a").id_code == doc.find("b").id_code == "!"
    assert doc.raw_value_at("!", 0) == "1"


def test_value_change_states():
    assert ValueChange(0, "!", "0x1z").states == (FourState.ZERO, FourState.X, FourState.ONE, FourState.Z)


# --- randomized properties ---------------------------------------------------------

_names = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)
_codes = st.text(alphabet=[chr(c) for c in range(33, 127)], min_size=1, max_size=3).filter(
    lambda s: not s.startswith("$")
)


@st.composite
def documents(draw):
    n_vars = draw(st.integers(1, 6))
    codes = draw(st.lists(_codes, min_size=n_vars, max_size=n_vars, unique=True))
    vars_ = []
    for i, code in enumerate(codes):
        path = draw(st.lists(_names, max_size=2))
        vars_.append(VarDecl(code, draw(st.integers(1, 40)), ".".join(path + [f"s{i}"]), draw(st.sampled_from(["wire", "reg"]))))
    n_changes = draw(st.integers(0, 30))
    times = sorted(draw(st.lists(st.integers(0, 10_000), min_size=n_changes, max_size=n_changes)))
    changes = []
    for t in times:
        v = draw(st.sampled_from(vars_))
        bits = draw(st.text(alphabet="01xz", min_size=v.width, max_size=v.width))
        changes.append(ValueChange(t, v.id_code, bits))
    unit = draw(st.sampled_from(["s", "ms", "us", "ns", "ps", "fs"]))
    return VcdDocument((draw(st.sampled_from([1, 10, 100])), unit), tuple(vars_), tuple(changes))


@settings(max_examples=300, deadline=None)
@given(documents())
def test_emit_parse_round_trip(doc):
    assert parse_vcd(emit_vcd(doc)) == doc


@settings(max_examples=200, deadline=None)
@given(documents(), st.integers(0, 12_000))
def test_value_at_total_and_piecewise_constant(doc, t):
    for v in doc.vars:
        value = signal_value_at(doc, v.id_code, t)
        assert len(value) == v.width
        times, _ = doc.series(v.id_code)
        later = [c for c in times if c > t]
        # any query before the next change sees the same value
        t_next = later[0] - 1 if later else t + 1000
        assert signal_value_at(doc, v.id_code, t_next) == value


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 64), st.text(alphabet="01xz", min_size=1, max_size=64))
def test_extension_keeps_low_bits(width, bits):
    if len(bits) > width:
        with pytest.raises(WidthMismatch):
            extend_value(bits, width)
        return
    out = extend_value(bits, width)
    assert len(out) == width and out.endswith(bits)
    assert set(out[: width - len(bits)]) <= ({bits[0]} if bits[0] in "xz" else {"0"})


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_parser_is_total(text):
    try:
        parse_vcd(text)
    except (MalformedDirective, UnknownIdCode, WidthMismatch, NonMonotonicTime):
        pass
