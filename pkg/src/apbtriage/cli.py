"""Command line front end: gen, train, eval, diagnose, inspect."""
from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import apb, cascade, evaluation, faultgen, forest, vcd
from .apb import DEFAULT_SIGNAL_MAP, Label, SignalMap
from .faultgen import AddressMap, GenSpec, write_atomic

# one exit status per declared error; argparse usage errors exit 2
EXIT_CODES = {
    vcd.UnknownIdCode: 10,
    vcd.WidthMismatch: 11,
    vcd.MalformedDirective: 12,
    vcd.NonMonotonicTime: 13,
    apb.XInPayload: 20,
    apb.ProtocolViolation: 21,
    apb.MissingSignal: 22,
    apb.ShortTail: 23,
    faultgen.MapCoversFullSpace: 30,
    faultgen.DatasetFormatError: 31,
    faultgen.FaultgenError: 32,
    forest.SingleClassInput: 40,
    forest.WidthMismatch: 41,
    forest.CorruptModel: 42,
    forest.VersionMismatch: 43,
    cascade.MissingClass: 50,
    evaluation.UnknownLabel: 60,
    evaluation.LengthMismatch: 61,
    evaluation.SingleClassInput: 62,
    evaluation.TooFewSamples: 63,
    OSError: 3,
    ValueError: 4,
}


def exit_code_for(exc: BaseException) -> int | None:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _parse_counts(text: str) -> dict[Label, int]:
    counts = {}
    for part in text.split(","):
        name, _, n = part.partition("=")
        try:
            counts[Label(name.strip())] = int(n)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad count {part!r}; use label=N with labels {[l.value for l in Label]}")
    return counts


def _parse_range(text: str) -> tuple[int, int]:
    base, _, last = text.partition(":")
    try:
        return int(base, 0), int(last, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use BASE:LAST, e.g. 0x0:0x7FFFFFFF")


def _hyperparams(args) -> forest.Hyperparams:
    return forest.Hyperparams(
        tree_count=args.trees,
        max_depth=args.max_depth,
        min_samples_split=args.min_samples_split,
        min_samples_leaf=args.min_samples_leaf,
        features_per_split=args.max_features,
        base_seed=args.seed,
    )


def _holdout(ds: faultgen.Dataset, holdout: float):
    if not 0.0 <= holdout < 1.0:
        raise ValueError("--holdout must lie in [0, 1)")
    return ds.split(1.0 - holdout)


# --- subcommands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.counts:
        counts = args.counts
    else:
        counts = {lab: args.per_label for lab in faultgen.LABEL_ORDER}
    amap = AddressMap(tuple(args.range)) if args.range else AddressMap()
    spec = GenSpec(counts, seed=args.seed, address_map=amap, read_fraction=args.read_fraction)
    ds = faultgen.generate_dataset(spec)
    faultgen.write_dataset(ds, args.out)
    if args.vcd_dir:
        out_dir = Path(args.vcd_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_atomic(out_dir / "signal_map.json", DEFAULT_SIGNAL_MAP.to_json())
        width = max(6, len(str(len(ds))))
        for i, s in enumerate(ds.samples):
            doc = apb.synth_waveform(s.transactions, DEFAULT_SIGNAL_MAP, args.period)
            write_atomic(out_dir / f"sample_{i:0{width}d}.vcd", vcd.emit_vcd(doc))
    print(f"wrote {len(ds)} samples to {args.out}" + (f" and VCD files to {args.vcd_dir}" if args.vcd_dir else ""))
    return 0


def cmd_train(args) -> int:
    ds = faultgen.read_dataset(args.dataset)
    train, _ = _holdout(ds, args.holdout)
    hp = _hyperparams(args)
    if args.stage:
        model = cascade.train_stage(train, args.stage, hp, feature_set=args.features, jobs=args.jobs)
        if args.into:
            bundle = cascade.load_cascade(Path(args.into).read_bytes())
            write_atomic(args.out, cascade.save_cascade(cascade.with_stage(bundle, model)))
        else:
            write_atomic(args.out, forest.save_forest(model))
        print(f"trained stage {args.stage} on {len(cascade.task_samples(train, args.stage))} samples -> {args.out}")
        return 0
    m = cascade.train_cascade(train, hp, feature_set=args.features, jobs=args.jobs)
    write_atomic(args.out, cascade.save_cascade(m))
    print(f"trained cascade on {len(train)} samples -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    ds_path, model_path = Path(args.dataset), Path(args.model)
    ds = faultgen.read_dataset(ds_path)
    m = cascade.load_cascade(model_path.read_bytes())
    train, test = _holdout(ds, args.holdout)
    result = cascade.evaluate_cascade(m, test, jobs=args.jobs)
    cv = {}
    if args.cv:
        cv_ds = train if args.cv_scope == "train" else ds
        hp = m.model("oor").hyperparams
        for task in cascade.STAGES:
            res = cascade.cross_validate_stage(
                cv_ds, task, hp, k=args.cv, seed=args.seed,
                feature_set=m.model(task).feature_set, jobs=args.jobs, scope=args.cv_scope,
            )
            cv[task] = res.to_dict()
    doc = {
        "dataset_sha256": _sha256(ds_path),
        "model_sha256": _sha256(model_path),
        "holdout": args.holdout,
        "test_samples": len(test),
        **result,
        "cv": cv,
    }
    if not args.predictions:
        doc.pop("predictions")
    if args.out:
        write_atomic(args.out, evaluation.report_json(doc))
    if args.format == "json":
        sys.stdout.write(evaluation.report_json(doc))
    else:
        print(render_report(doc))
    return 0


def render_report(doc: dict) -> str:
    lines = [f"test samples: {doc['test_samples']} (holdout {doc['holdout']})", ""]
    for task, st in doc["stages"].items():
        cm = evaluation.ConfusionMatrix(tuple(st["confusion"]["classes"]), _np_counts(st["confusion"]["counts"]))
        lines.append(f"stage {task}: accuracy {st['accuracy']:.4f}  AUC {st['auc']:.4f}")
        lines.append(cm.render())
        if task in doc.get("cv", {}):
            lines.append(f"{doc['cv'][task]['k']}-fold CV accuracy {doc['cv'][task]['formatted']}")
        lines.append("")
    for key, title in (("cascade_fine", "cascade (fine labels)"), ("cascade_merged", "cascade (merged data_error)")):
        block = doc[key]
        cm = evaluation.ConfusionMatrix(tuple(block["confusion"]["classes"]), _np_counts(block["confusion"]["counts"]))
        lines.append(title)
        lines.append(cm.render())
        lines.append(f"{'Class':<20}{'Precision(%)':>14}{'Recall(%)':>11}{'F1(%)':>9}{'TP':>9}")
        for c, row in block["metrics"]["per_class"].items():
            lines.append(f"{c:<20}{row['precision']:>14.2f}{row['recall']:>11.2f}{row['f1']:>9.2f}{row['tp']:>9,}")
        met = block["metrics"]
        lines.append(f"Overall accuracy {met['accuracy']:.2f}% ({met['correct']:,} / {met['total']:,})")
        lines.append("")
    return "\n".join(lines).rstrip()


def _np_counts(rows):
    return np.asarray(rows, dtype=np.int64)


def _vcd_paths(items: list[str]) -> list[Path]:
    paths: list[Path] = []
    for item in items:
        p = Path(item)
        paths.extend(sorted(p.glob("*.vcd")) if p.is_dir() else [p])
    return paths


def _load_map(path: str | None) -> SignalMap:
    return SignalMap.load(path) if path else DEFAULT_SIGNAL_MAP


def _windows(doc: vcd.VcdDocument, smap: SignalMap, name: str) -> list[apb.Sample]:
    txns = apb.extract_transactions(doc, smap)
    try:
        return apb.group_samples(txns)
    except apb.ShortTail as tail:
        print(f"warning: {name}: {tail}", file=sys.stderr)
        return tail.samples


def cmd_diagnose(args) -> int:
    m = cascade.load_cascade(Path(args.model).read_bytes())
    smap = _load_map(args.map)
    paths = _vcd_paths(args.vcd)
    windows: list[tuple[str, int, apb.Sample]] = []
    for path in paths:
        doc = vcd.parse_vcd(path.read_text())
        for i, s in enumerate(_windows(doc, smap, path.name)):
            windows.append((path.name, i, s))
    labels = cascade.diagnose_many(m, [w[2] for w in windows], jobs=args.jobs)
    prefix = len(paths) > 1
    for (name, i, _), lab in zip(windows, labels):
        line = f"window {i}: {lab.value}"
        if lab.reported != lab.value:
            line += f" ({lab.reported})"
        print(f"{name} {line}" if prefix else line)
    return 0


def cmd_inspect(args) -> int:
    smap = _load_map(args.map)
    for path in _vcd_paths(args.vcd):
        doc = vcd.parse_vcd(path.read_text())
        for t in apb.extract_transactions(doc, smap):
            print(f"t={t.time} {t.describe()}" if args.times else t.describe())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apbtriage", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labeled synthetic dataset")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--per-label", type=int, default=4000, help="samples per label (default 4000)")
    g.add_argument("--counts", type=_parse_counts, help="explicit counts, e.g. no_error=100,data_error_0=50")
    g.add_argument("--range", type=_parse_range, action="append",
                   help="valid completer range BASE:LAST (repeatable; default 0x0:0x7FFFFFFF)")
    g.add_argument("--read-fraction", type=float, default=0.0)
    g.add_argument("--out", required=True)
    g.add_argument("--vcd-dir", help="also write one synthesized VCD per sample here")
    g.add_argument("--period", type=int, default=10, help="simulation time per APB phase in emitted VCDs")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the cascade (or one stage) from a dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--stage", choices=cascade.STAGES, help="train only this stage")
    t.add_argument("--into", help="with --stage: replace that slot of an existing bundle")
    t.add_argument("--holdout", type=float, default=0.2, help="trailing fraction kept out of training (default 0.2)")
    t.add_argument("--features", choices=sorted(forest.FEATURE_SETS), default=forest.DEFAULT_FEATURE_SET)
    t.add_argument("--trees", type=int, default=200)
    t.add_argument("--max-depth", type=int, default=15)
    t.add_argument("--min-samples-split", type=int, default=5)
    t.add_argument("--min-samples-leaf", type=int, default=2)
    t.add_argument("--max-features", type=int, default=None, help="features per split (default floor(sqrt(n)))")
    t.add_argument("--seed", type=int, default=42, help="forest base seed")
    t.add_argument("--jobs", type=int, default=1)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a cascade bundle on a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--holdout", type=float, default=0.2, help="evaluate on this trailing fraction (0 = all)")
    e.add_argument("--cv", type=int, default=0, metavar="K", help="also run stratified K-fold CV per stage")
    e.add_argument("--cv-scope", choices=("train", "full"), default="train")
    e.add_argument("--seed", type=int, default=42, help="CV fold seed")
    e.add_argument("--format", choices=("text", "json"), default="text")
    e.add_argument("--out", help="write the JSON report here")
    e.add_argument("--predictions", action="store_true", help="include per-sample predictions in the JSON report")
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("diagnose", help="label every 20-transaction window of VCD dumps")
    d.add_argument("--vcd", required=True, nargs="+", help="VCD files or directories of them")
    d.add_argument("--map", help="signal map JSON (default: apb.PSEL, apb.PENABLE, ...)")
    d.add_argument("--model", required=True)
    d.add_argument("--jobs", type=int, default=1)
    d.set_defaults(func=cmd_diagnose)

    i = sub.add_parser("inspect", help="list the APB transactions in VCD dumps")
    i.add_argument("--vcd", required=True, nargs="+")
    i.add_argument("--map")
    i.add_argument("--times", action="store_true", help="prefix each transfer with its completion time")
    i.set_defaults(func=cmd_inspect)
    return p


def run_cli(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        print(f"apbtriage: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
