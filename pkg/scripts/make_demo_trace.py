"""Write scenarios/trace_demo.csv: reference instruction mixes, switching halfway.

Tile 0 runs high-power mixes then drops to low; tile 1 does the opposite.
"""

import argparse
from pathlib import Path

import numpy as np

from tpmon.power import reference_trace, write_trace_csv

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--out", type=Path, default=ROOT / "scenarios" / "trace_demo.csv")
    args = ap.parse_args()

    half = args.steps // 2
    first = reference_trace(["high", "high", "medium", "low", "low", "idle", "idle", "low"], half)
    second = reference_trace(["low", "idle", "low", "low", "high", "medium", "high", "high"], args.steps - half)
    write_trace_csv(np.concatenate([first, second]), args.out)
    print(f"wrote {args.out} ({args.steps} steps)")


if __name__ == "__main__":
    main()
