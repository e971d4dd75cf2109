"""Banshee miss rate and Tag traffic across sampling coefficients on one trace.

    python scripts/sweep_sampling.py [--config configs/sampling_sweep.json]
"""

import argparse
from pathlib import Path

from banshee_sim.config import load
from banshee_sim.runner import format_table, run_sweep, write_reports

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "sampling_sweep.json")
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    reports = run_sweep(load(args.config), jobs=args.jobs)
    print(format_table(reports), end="")
    top = reports[0].traffic["in_package"]["Tag"] or 1
    for r in reports:
        print(f"{r.params}: Tag {r.traffic['in_package']['Tag'] / top:.3f} of the first point")
    write_reports(args.out, "sampling_sweep", reports)


if __name__ == "__main__":
    main()
