#!/usr/bin/env python3
"""Full slab experiment: census, assembly diagnostics, eigensolves near the
five drive frequencies, forced resonance at 80 Hz, nodal extraction at the
threshold ladder, and the flux tables for both bases.

Writes everything under --out (default ./slab_run).  Expect a few minutes:
the five shift-invert solves on the 99k-DOF coarse system dominate.
"""

import argparse
import sys
import time
from pathlib import Path

from platevib.cli import main as cli


def run(args):
    print(f"$ platevib {' '.join(args)}", flush=True)
    t0 = time.time()
    rc = cli(args)
    print(f"  -> rc={rc} in {time.time() - t0:.1f}s", flush=True)
    if rc != 0:
        sys.exit(rc)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="slab_run")
    ap.add_argument("--thickness-cm", type=float, default=1.0,
                    help="slab thickness in cm (1.0, 0.5 or 0.25 in the experiments)")
    ap.add_argument("--freqs", default="80,147,222,304,349")
    ap.add_argument("--quick", action="store_true",
                    help="shrink the slab for a fast smoke run")
    ns = ap.parse_args()

    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    if ns.quick:
        body = ["--slab", "3x1x4", "--cell", f"1x{ns.thickness_cm:g}x1"]
    else:
        body = ["--slab", "10x2x20", "--cell", f"1x{ns.thickness_cm / 2:g}x1"]
    common = body + ["--out", str(out)]

    run(["mesh"] + common)
    run(["assemble"] + common)
    run(["eigs", "--freqs", ns.freqs] + common)
    run(["resonate", "--freqs", "80", "--basis", "coarse",
         "--comega", "0.8,0.04,0.02,0.01,0.005"] + common)
    run(["flux", "--freqs", ns.freqs] + common)
    print(f"artifacts in {out}/")


if __name__ == "__main__":
    main()
