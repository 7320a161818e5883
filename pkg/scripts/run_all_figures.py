#!/usr/bin/env python3
"""Run every bundled experiment manifest and collect the outputs in out/.

The heavy noise scans take tens of minutes in total; pass manifest names to
run a subset, e.g. ``python scripts/run_all_figures.py splitting_curve``.
"""
import pathlib
import sys
import time

from donorspin.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent
ORDER = ["splitting_curve", "rz_angle_curve", "hprime_dump", "rz_noise",
         "cphase_curve", "rx_noise", "sweep_echo_noise"]


def run(selected=None):
    (ROOT / "out").mkdir(exist_ok=True)
    for name in selected or ORDER:
        manifest = ROOT / "manifests" / f"{name}.txt"
        if not manifest.exists():
            print(f"skipping unknown manifest {name}")
            continue
        t0 = time.time()
        code = main(["run", str(manifest)])
        print(f"  -> exit {code} in {time.time() - t0:.1f}s")
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:] or None))
