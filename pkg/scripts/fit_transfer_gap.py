#!/usr/bin/env python3
"""Transfer-gap demo: synthesize measured-loss CSVs for three training-set
variants with planted loss floors, fit learning curves, and rank the floors.

Stands in for the real workflow where losses come from an external training
pipeline. Usage:

    python scripts/fit_transfer_gap.py --out /tmp/forge-fits [--seed 0]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from drumforge.cli import main as forge_main

# planted (alpha, beta, gamma): a real-audio baseline transfers best, the
# forge corpus sits in between, a legacy synthetic set trails
CURVES = {
    "real-baseline": (0.9, 0.45, 0.020),
    "forge-corpus": (0.8, 0.40, 0.045),
    "legacy-synth": (0.7, 0.30, 0.090),
}
TRACK_COUNTS = (1, 4, 16, 64, 256, 1024, 4096, 8192)


def synthesize_losses(path: Path, seed: int) -> None:
    rng = np.random.default_rng(seed)
    rows = ["dataset,split,n_tracks,loss"]
    for dataset, (alpha, beta, gamma) in CURVES.items():
        for n in TRACK_COUNTS:
            test = (alpha * n ** (-beta) + gamma) * (1 + rng.uniform(-0.015, 0.015))
            # on-domain validation sits below test and floors near zero
            val = (alpha * n ** (-beta) + gamma / 6) * (1 + rng.uniform(-0.015, 0.015))
            rows.append(f"{dataset},test,{n},{test:.6f}")
            rows.append(f"{dataset},validation,{n},{val:.6f}")
    path.write_text("\n".join(rows) + "\n")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--bootstrap", type=int, default=1000)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    losses = out / "losses.csv"
    synthesize_losses(losses, args.seed)
    print(f"synthesized losses at {losses}")
    return forge_main([
        "fit", str(losses), "--out", str(out / "fits"),
        "--bootstrap", str(args.bootstrap), "--seed", str(args.seed),
    ])


if __name__ == "__main__":
    sys.exit(main())
