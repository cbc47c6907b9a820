from __future__ import annotations

import json
import subprocess
import sys

import pytest

from apbtriage import apb, vcd
from apbtriage.apb import DEFAULT_SIGNAL_MAP, ApbTransaction
from apbtriage.cascade import load_cascade
from apbtriage.cli import EXIT_CODES, exit_code_for, run_cli


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run_cli(["gen", "--seed", "5", "--per-label", "400", "--out", str(d / "ds.jsonl")]) == 0
    assert run_cli(["train", "--dataset", str(d / "ds.jsonl"), "--out", str(d / "model.bin"), "--trees", "20"]) == 0
    return d


def write_vcd(path, txns):
    path.write_text(vcd.emit_vcd(apb.synth_waveform(txns)))
    return path


def test_gen_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run_cli(["gen", "--seed", "42", "--per-label", "50", "--out", str(tmp_path / f"{name}.jsonl")]) == 0
    a = (tmp_path / "a.jsonl").read_bytes()
    assert a == (tmp_path / "b.jsonl").read_bytes()
    # header plus one line per sample
    assert len(a.splitlines()) == 251


def test_inspect_write_example(tmp_path, capsys):
    path = write_vcd(tmp_path / "w.vcd", [ApbTransaction(0x8A, 0xD5)])
    assert run_cli(["inspect", "--vcd", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "WRITE addr=0x0000008A data=0x000000D5"
    assert run_cli(["inspect", "--vcd", str(path), "--times"]) == 0
    assert capsys.readouterr().out.strip() == "t=10 WRITE addr=0x0000008A data=0x000000D5"


def test_diagnose_out_of_range_window(workdir, tmp_path, capsys):
    txns = [ApbTransaction(0x8000_0000 + 4 * i, i) for i in range(20)]
    path = write_vcd(tmp_path / "run.vcd", txns)
    smap = tmp_path / "map.json"
    smap.write_text(DEFAULT_SIGNAL_MAP.to_json())
    assert run_cli(["diagnose", "--vcd", str(path), "--map", str(smap), "--model", str(workdir / "model.bin")]) == 0
    assert capsys.readouterr().out.strip() == "window 0: out_of_range_error"


def test_diagnose_short_tail_warns(workdir, tmp_path, capsys):
    txns = [ApbTransaction(0x8000_0000 + i, i) for i in range(25)]
    path = write_vcd(tmp_path / "run.vcd", txns)
    assert run_cli(["diagnose", "--vcd", str(path), "--model", str(workdir / "model.bin")]) == 0
    out = capsys.readouterr()
    assert out.out.strip() == "window 0: out_of_range_error"
    assert "5 trailing transaction(s)" in out.err


def test_eval_json_report(workdir, tmp_path, capsys):
    out = tmp_path / "report.json"
    args = ["eval", "--dataset", str(workdir / "ds.jsonl"), "--model", str(workdir / "model.bin"),
            "--format", "json", "--out", str(out), "--cv", "2"]
    assert run_cli(args) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == json.loads(out.read_text())
    assert doc["test_samples"] == 400
    assert set(doc["cv"]) == {"oor", "addr", "d0", "d1"}
    assert "±" in doc["cv"]["oor"]["formatted"]
    assert run_cli(["eval", "--dataset", str(workdir / "ds.jsonl"), "--model", str(workdir / "model.bin")]) == 0
    text = capsys.readouterr().out
    assert "Overall accuracy" in text and "stage addr" in text


def test_train_single_stage_into_bundle(workdir, tmp_path):
    out = tmp_path / "m2.bin"
    args = ["train", "--dataset", str(workdir / "ds.jsonl"), "--out", str(out), "--trees", "5",
            "--stage", "d1", "--into", str(workdir / "model.bin")]
    assert run_cli(args) == 0
    m = load_cascade(out.read_bytes())
    assert m.model("d1").hyperparams.tree_count == 5
    assert m.model("d0").hyperparams.tree_count == 20


@pytest.mark.parametrize(
    "setup,code",
    [
        ("badvcd", EXIT_CODES[vcd.MalformedDirective]),
        ("nomodel", 3),
        ("corrupt", 42),
        ("missing_signal", EXIT_CODES[apb.MissingSignal]),
    ],
)
def test_diagnose_exit_codes(workdir, tmp_path, setup, code, capsys):
    good = write_vcd(tmp_path / "ok.vcd", [ApbTransaction(1, 2)] * 20)
    model = workdir / "model.bin"
    args = ["diagnose", "--vcd", str(good), "--model", str(model)]
    if setup == "badvcd":
        (tmp_path / "bad.vcd").write_text("$var wire 1 ! a\n")
        args[2] = str(tmp_path / "bad.vcd")
    elif setup == "nomodel":
        args[-1] = str(tmp_path / "absent.bin")
    elif setup == "corrupt":
        (tmp_path / "c.bin").write_bytes(model.read_bytes()[:100])
        args[-1] = str(tmp_path / "c.bin")
    elif setup == "missing_signal":
        (tmp_path / "map.json").write_text(json.dumps({**DEFAULT_SIGNAL_MAP.bindings, "PADDR": "apb.nope"}))
        args += ["--map", str(tmp_path / "map.json")]
    assert run_cli(args) == code
    assert "apbtriage: error:" in capsys.readouterr().err


def test_missing_class_exit_code(tmp_path):
    ds = tmp_path / "ds.jsonl"
    assert run_cli(["gen", "--counts", "no_error=20,out_of_range_error=20", "--out", str(ds)]) == 0
    assert run_cli(["train", "--dataset", str(ds), "--out", str(tmp_path / "m.bin"), "--trees", "2"]) == 50


def test_exit_code_lookup_walks_hierarchy():
    assert exit_code_for(FileNotFoundError()) == 3
    assert exit_code_for(RuntimeError()) is None
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "apbtriage", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "diagnose" in proc.stdout
