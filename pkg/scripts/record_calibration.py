"""Record the shipped calibration file.

Two measurements go into src/evolenia/data/calibration.json:

1. Ring-decomposition error statistics over random genotypes, straight
   from run_calibration with its default seed.

2. The equivalence tolerance: the worst one-step gap between the engine
   and the dense float64 reference dynamics advanced from the same
   predecessor state (see calibrate.run_equivalence), taken across
   several genotypes and doubled for margin.  The acceptance suite
   replays one of these runs and must stay inside it.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from evolenia.calibrate import run_calibration, run_equivalence

EQUIV_SIDE = 128
EQUIV_STEPS = 100
EQUIV_GENOTYPE_SEEDS = (7, 21, 42)


def main() -> int:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "src/evolenia/data/calibration.json")

    print("ring calibration ...", flush=True)
    rings = run_calibration()
    print(f"  mean {rings['mean']:.4f}  median {rings['median']:.4f}  "
          f"p95 {rings['p95']:.4f}  max {rings['max']:.4f}  "
          f"aniso {rings['rotation_asymmetry_max']:.2e}")

    divergences = {}
    for seed in EQUIV_GENOTYPE_SEEDS:
        d = run_equivalence(seed, EQUIV_SIDE, EQUIV_STEPS)
        divergences[str(seed)] = d
        print(f"  equivalence run (genotype seed {seed}): max per-step divergence {d:.3e}", flush=True)
    worst = max(divergences.values())

    doc = {
        "ring": rings,
        "equivalence": {
            "side": EQUIV_SIDE,
            "steps": EQUIV_STEPS,
            "genotype_seeds": list(EQUIV_GENOTYPE_SEEDS),
            "measured_max_divergence": worst,
            "per_seed": divergences,
            "tolerance": 2.0 * worst,
        },
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {out} (equivalence tolerance {2.0 * worst:.3e})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
