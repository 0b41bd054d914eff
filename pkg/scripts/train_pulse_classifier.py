#!/usr/bin/env python3
"""Train the stock 5x5 pulse classifier end to end and export circuit values.

Generates the three-class Gaussian-pulse dataset (default 30/50/70 Hz pulse
centers), trains the lattice couplings with backprop-through-time + Adam,
scores the held-out split, converts the result to realizable circuit values,
and writes the artifacts (metrics, exact + quantized systems, quantization
report) to --out.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys
import time

try:
    import resonet  # noqa: F401
except ImportError:  # running from a checkout without `pip install -e .`
    sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from resonet import signals, trainer
from resonet.lattice import LatticeSpec, save_system


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", type=pathlib.Path,
                    default=pathlib.Path("runs/pulse_classifier"))
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0, help="training seed")
    ap.add_argument("--data-seed", type=int, default=1, help="dataset seed")
    ap.add_argument("--centers", default="30,50,70",
                    help="comma-separated pulse center frequencies in Hz")
    ap.add_argument("--series", default="E96", choices=["E24", "E96"],
                    help="resistor series for the quantized export")
    args = ap.parse_args(argv)

    centers = tuple(float(c) for c in args.centers.split(","))
    ds = signals.gen_dataset(signals.DatasetSpec(centers_hz=centers,
                                                 seed=args.data_seed))
    train_split, heldout = ds.split("train"), ds.split("test")
    spec = LatticeSpec.default_grid()
    cfg = trainer.TrainConfig(epochs=args.epochs, seed=args.seed)
    print(f"dataset: {len(train_split)} train / {len(heldout)} held-out "
          f"pulses, classes at {'/'.join(f'{c:g}' for c in centers)} Hz")
    print(f"lattice: {spec.rows}x{spec.cols}, input cell {spec.input_cell}, "
          f"output cells {list(spec.outputs)}")

    def progress(ck):
        h = ck.history[-1]
        print(f"  epoch {h['epoch']:3d}   loss {h['loss']:.4f}   "
              f"train {h['train_acc']:6.1%}   held-out {h['val_acc']:6.1%}")

    t0 = time.perf_counter()
    result = trainer.train(spec, ds, cfg, on_epoch=progress)
    print(f"training stopped after {time.perf_counter() - t0:.0f}s "
          f"({result.stop_reason})")
    if result.aborted:
        print("run diverged; artifacts reflect the last stable epoch")

    exp = trainer.export_trained(spec, result.mech, series=args.series,
                                 heldout=heldout)
    print(f"held-out accuracy: exact {exp.accuracy_exact:.1%}, "
          f"{args.series} {exp.accuracy_quantized:.1%}")
    print(f"quantization: {len(exp.report.changed)}/{len(exp.report.entries)} "
          f"values changed, max rel error {exp.report.max_rel_error:.2%}")

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w") as fh:
        fh.write("epoch,loss,train_acc,val_acc\n")
        for h in result.history:
            fh.write(f"{h['epoch']},{h['loss']!r},{h['train_acc']!r},"
                     f"{h['val_acc']!r}\n")
    save_system(out / "system.json", spec, exp.circuit, exp.scaling)
    save_system(out / "system_quantized.json", spec, exp.quantized,
                exp.scaling)
    with open(out / "quantization.json", "w") as fh:
        json.dump(exp.report.to_json_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"artifacts written to {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
