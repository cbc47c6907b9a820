"""Compare the compiled and pure-Python forest kernels on desk-sized inputs.

    python3 benchmarks/bench_kernels.py [--rows 16000] [--trees 5] [--repeat 3]

Both backends must produce identical trees and probabilities; the script
checks that before printing timings.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from apbtriage import cascade
from apbtriage.apb import Label
from apbtriage.faultgen import GenSpec, generate_dataset
from apbtriage.forest import Hyperparams, best_split, native_available, train_forest, use_backend
from apbtriage.forest.features import value_slots


def timed(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=16_000)
    ap.add_argument("--trees", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--features", default="lanes", choices=("bits", "lanes"))
    args = ap.parse_args()
    if not native_available():
        raise SystemExit("compiled kernels are not built; run `pip install --no-build-isolation -e .` first")

    half = args.rows // 2
    ds = generate_dataset(GenSpec({Label.DATA_0: half, Label.NO_ERROR: half // 2, Label.DATA_1: half - half // 2}))
    X, y = cascade.task_matrix(ds, "d0", args.features)
    slots = value_slots(args.features)
    rng = np.random.default_rng(0)
    feats = np.sort(rng.choice(X.shape[1], size=int(np.sqrt(X.shape[1])), replace=False))
    rows = np.arange(len(y))
    hp = Hyperparams(tree_count=args.trees, base_seed=1)
    probe = X[: min(len(X), 4000)]

    results = {}
    for backend in ("native", "python"):
        use_backend(backend)
        t_split, split = timed(lambda: best_split(X, y, rows, feats, value_slots=slots), args.repeat)
        t_train, forest = timed(lambda: train_forest(X, y, hp, feature_set=args.features), 1)
        t_pred, proba = timed(lambda: forest.predict_proba(probe), args.repeat)
        results[backend] = (t_split, t_train, t_pred, split, forest, proba)
    use_backend("native")

    nat, py = results["native"], results["python"]
    assert nat[3] == py[3], "best_split differs between backends"
    assert nat[4].trees == py[4].trees, "trees differ between backends"
    assert np.array_equal(nat[5], py[5]), "probabilities differ between backends"

    print(f"{X.shape[0]} rows x {X.shape[1]} features ({args.features}), {args.trees} trees")
    print(f"{'kernel':<28}{'native (s)':>12}{'python (s)':>12}{'speedup':>10}")
    for i, name in enumerate((f"best_split ({len(feats)} feats, root)", f"train {args.trees} trees",
                              f"predict {len(probe)} rows")):
        print(f"{name:<28}{nat[i]:>12.4f}{py[i]:>12.4f}{py[i] / nat[i]:>9.1f}x")
    print("outputs identical across backends")


if __name__ == "__main__":
    main()
