#!/usr/bin/env python3
"""Per-stage wall time of the pipeline at a fixed output size, for each magnification."""
import argparse
import time

from lfsr.alignment import FlowParams
from lfsr.resample import DegradationParams, degrade
from lfsr.restoration import PipelineConfig, superresolve
from lfsr.synthetic import benchmark_lightfield


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=9)
    ap.add_argument("--height", type=int, default=432)
    ap.add_argument("--width", type=int, default=624)
    ap.add_argument("--alphas", default="2,3,4")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    hr, _ = benchmark_lightfield(0, args.grid, args.grid, (args.height, args.width), 1.0)
    for alpha in map(int, args.alphas.split(",")):
        lr = degrade(hr, DegradationParams(alpha=alpha))
        t0 = time.perf_counter()
        res = superresolve(lr, PipelineConfig(alpha=alpha, threads=args.threads, flow=FlowParams(max_disparity=6)))
        total = time.perf_counter() - t0
        stages = "  ".join(f"{k} {v:.1f}" for k, v in res.timings.items())
        print(f"x{alpha}: {lr.X}x{lr.Y} -> {hr.X}x{hr.Y}, {total:.1f} s  ({stages})")


if __name__ == "__main__":
    main()
