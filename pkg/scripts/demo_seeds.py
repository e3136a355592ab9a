#!/usr/bin/env python3
"""Run the CLI demo for several seeds and tabulate the summaries."""
import argparse
import json
import tempfile
from pathlib import Path

from lfsr.cli import main as lfsr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--alpha", default="3")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        for seed in args.seeds.split(","):
            out = Path(tmp) / seed
            rc = lfsr(["demo", "--seed", seed, "--alpha", args.alpha, "--output", str(out)])
            s = json.loads((out / "summary.json").read_text())
            print(f"seed {seed}: exit {rc}, bicubic {s['mean_psnr']['bicubic']:.2f} dB, "
                  f"pb {s['mean_psnr']['pb']:.2f} dB, slope {s['refocus_best_slope']:.2f}")


if __name__ == "__main__":
    main()
