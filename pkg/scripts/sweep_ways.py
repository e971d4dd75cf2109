"""Banshee miss rate and traffic across 1/2/4/8 ways.

    python scripts/sweep_ways.py [--config configs/ways_sweep.json] [--jobs 4]
"""

import argparse
from pathlib import Path

from banshee_sim.config import load
from banshee_sim.runner import format_table, run_sweep, write_reports

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "ways_sweep.json")
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    reports = run_sweep(load(args.config), jobs=args.jobs)
    print(format_table(reports), end="")
    rates = [r.miss_rate for r in reports]
    gains = [a - b for a, b in zip(rates, rates[1:])]
    print("miss-rate gain per doubling:", " ".join(f"{100 * g:+.2f}pp" for g in gains))
    write_reports(args.out, "ways_sweep", reports)


if __name__ == "__main__":
    main()
