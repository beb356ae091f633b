"""d-coordinate box robustness repairs on a seeded 16-input network.

    python scripts/robustbox_desk.py --d 5,8,10 --report robust.json
"""

import argparse

from polyrepair.demos import robustbox_desk
from polyrepair.io import write_report
from polyrepair.repair import RepairConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", default="5,8,10")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--report")
    args = ap.parse_args()
    ds = tuple(int(x) for x in args.d.split(","))
    demo = robustbox_desk(ds, args.seed, RepairConfig(seed=args.seed), eps=args.eps)
    print(demo.table())
    if args.report:
        write_report(demo.info, args.report)
    raise SystemExit(0 if demo.passed else 3)


if __name__ == "__main__":
    main()
