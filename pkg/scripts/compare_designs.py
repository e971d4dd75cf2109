"""Side-by-side traffic of every design on one shared trace.

    python scripts/compare_designs.py [--config configs/compare.json]
"""

import argparse
from pathlib import Path

from banshee_sim.config import load
from banshee_sim.runner import format_table, run_point, write_reports

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "compare.json")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    reports = run_point(load(args.config))
    print(format_table(reports), end="")
    for r in reports:
        print(f"{r.design:>10}: {r.bytes_per_instr('in_package'):.3f} in-package B/instr, "
              f"{r.bytes_per_instr('off_package'):.3f} off-package B/instr")
    write_reports(args.out, "compare", reports)


if __name__ == "__main__":
    main()
