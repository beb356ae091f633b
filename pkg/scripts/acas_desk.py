"""Seeded ACAS-style desk experiment: 24 boxes, argmin-invariance specs.

    python scripts/acas_desk.py --seed 0 --report acas.json
"""

import argparse

from polyrepair.demos import acas_desk
from polyrepair.io import write_report
from polyrepair.repair import RepairConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--boxes", type=int, default=24)
    ap.add_argument("--report")
    args = ap.parse_args()
    demo, _ = acas_desk(args.seed, args.samples, RepairConfig(seed=args.seed), n_boxes=args.boxes)
    print(demo.table())
    if args.report:
        write_report(demo.info, args.report)
    raise SystemExit(0 if demo.passed else 3)


if __name__ == "__main__":
    main()
