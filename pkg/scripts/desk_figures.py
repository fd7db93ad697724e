#!/usr/bin/env python3
"""Reproduce the desk-scale figure set end to end.

Runs every measurement subcommand with its default experiment grid and
collects CSV + SVG outputs under runs/. Figures come out qualitatively
comparable to the large-scale originals: exponential length growth with
depth, transitions tracking length, dichotomies governed by remaining depth,
region decompositions of the input plane, and the three layer-sensitivity
training experiments.

    python scripts/desk_figures.py [--fast] [--out DIR]
"""
import argparse
import sys
import time
from pathlib import Path

from xplab.cli import main as xplab_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="output root directory")
    parser.add_argument("--fast", action="store_true", help="small grids for a quick pass")
    args = parser.parse_args()
    root = Path(args.out)
    seeds = "5" if args.fast else "30"
    train_epochs = "10" if args.fast else "40"

    jobs = [
        ("regions2d", ["--width", "4", "--depth", "3", "--seed", "1", "--out", str(root / "regions2d" / "fig_regions.svg")]),
        ("region-bounds", ["--k", "6", "--m", "2", "--out", str(root / "region-bounds")]),
        ("growth-bounds", ["--ks", "8,32,128,512", "--sigma-ws", "1,2,4,8", "--sigma-b", "1", "--out", str(root / "growth-bounds")]),
        ("traj-growth", ["--width", "100", "--depth", "10", "--sigma-w-sqs", "1,4,16", "--sigma-b-sq", "1", "--seeds", seeds, "--num-points", "257", "--rel-tol", "0.01", "--out", str(root / "traj-growth")]),
        ("transitions", ["--width", "32", "--input-dim", "16", "--depths", "1,2,3,4,5,6", "--sigma-w-sq", "8", "--seeds", seeds, "--out", str(root / "transitions")]),
        ("trans-vs-length", ["--widths", "8,64", "--sigma-w-sqs", "8,64", "--depths", "1,2,3,4,5,6,7,8", "--seeds", "10" if args.fast else "20", "--out", str(root / "trans-vs-length")]),
        ("dichotomies", ["--width", "128", "--depths", "2,4,6,8", "--s", "15", "--num-t", "1024", "--seeds", "10" if args.fast else "20", "--out", str(root / "dichotomies")]),
        ("remaining-depth", ["--width", "64", "--depths", "2,4,6", "--s", "15", "--num-t", "1024", "--seeds", "5" if args.fast else "10", "--out", str(root / "remaining-depth")]),
        ("train-noise", ["--width", "64", "--depth", "6", "--spread", "0.25", "--sigma-w-sq", "2", "--sigma-b-sq", "0.05", "--epochs", train_epochs, "--out", str(root / "train-noise")]),
        ("train-single-layer", ["--width", "100", "--depth", "5", "--data-dim", "30", "--per-class", "200", "--spread", "0.4", "--sigma-w-sq", "1", "--sigma-b-sq", "0.01", "--learning-rate", "0.3", "--epochs", train_epochs, "--out", str(root / "train-single-layer")]),
        ("train-trajlen", ["--width", "64", "--depth", "4", "--spread", "0.3", "--sigma-w-sq", "2", "--sigma-b-sq", "0.05", "--epochs", train_epochs, "--eval-every", "200", "--out", str(root / "train-trajlen")]),
    ]
    for sub, rest in jobs:
        t0 = time.time()
        code = xplab_main([sub, *rest])
        print(f"[{time.time() - t0:6.1f}s] {sub}: {'ok' if code == 0 else f'exit {code}'}")
        if code != 0:
            return code
    print(f"outputs under {root}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
