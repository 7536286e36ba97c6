"""Calibrate against the reference targets and print the equilibrium datapoints
and allocator results they imply.
"""

import argparse

import numpy as np

from tpmon.alloc import ControlTarget, TaskSet, describe_mapping, exhaustive_allocate, greedy_allocate
from tpmon.thermal import (
    REFERENCE_TARGETS,
    CalibrationTargets,
    build_network,
    calibrate,
    calibration_residuals,
    calibration_temperatures,
)
from tpmon.topology import Floorplan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g-amb", type=float, default=0.1)
    ap.add_argument("--tau", type=float, default=5e-3)
    args = ap.parse_args()

    targets = CalibrationTargets(**REFERENCE_TARGETS)
    params, levels = calibrate(targets, g_amb_scale=args.g_amb, tau=args.tau)
    g = params.g_amb
    print(f"t_amb {params.t_amb:.4f} C  g_lat/g_amb {params.g_lat / g:.4f}")
    print(f"p/g_amb  low {levels.p_low / g:.4f}  medium {levels.p_med / g:.4f}  high {levels.p_high / g:.4f}")

    print("\ncalibration tiles")
    got = calibration_temperatures(params, levels)
    res = calibration_residuals(targets, params, levels)
    for name, want in REFERENCE_TARGETS.items():
        print(f"  {name:<26} target {want:6.2f}  model {got[name]:8.4f}  residual {res[name]:+.2e}")

    fp = Floorplan()
    net = build_network(fp, params)
    ts = TaskSet.reference()
    for target in ControlTarget:
        for fn in (exhaustive_allocate, greedy_allocate):
            mapping, score = fn(ts, net, levels, target)
            print(f"\n{target.value} ({fn.__name__.split('_')[0]}): objective {score.objective:.4f}")
            for t in range(fp.n_tiles):
                grid = np.full((fp.rows_per_tile, fp.cols_per_tile), ".", dtype=object)
                for tid, core, _ in describe_mapping(mapping, fp):
                    if core.tile == t:
                        grid[core.row, core.col] = tid[0].upper()
                temps = score.temps[fp.tile_slice(t)]
                rows = " / ".join("".join(r) for r in grid)
                print(f"  tile {t}: {rows}  temps {np.array2string(temps, precision=3)}")


if __name__ == "__main__":
    main()
