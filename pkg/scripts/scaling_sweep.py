"""LP size and wall-clock over growing vertex counts on one fixed network.

    python scripts/scaling_sweep.py --out scaling.json
"""

import argparse
import time

import numpy as np

from polyrepair.demos import random_network
from polyrepair.formulas import OutputFormula, RepairSpec
from polyrepair.io import write_report
from polyrepair.nn import VPolytope, forward
from polyrepair.repair import vpolytope_repair


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--counts", default="8,16,32,64,128")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--out")
    args = ap.parse_args()
    counts = [int(c) for c in args.counts.split(",")]

    net = random_network([4, 16, 16, 16, 3], args.seed)
    rng = np.random.default_rng(args.seed)
    center = rng.uniform(-1, 1, 4)
    target = (int(np.argmax(forward(net, center))) + 1) % 3
    rows = []
    for k in range(len(net) - 1):
        suffix = sum(layer.n_out for layer in net.layers[k:])
        for V in counts:
            verts = center + rng.uniform(-0.01, 0.01, size=(V, 4))
            spec = RepairSpec.of([VPolytope(verts)], [OutputFormula.classify(target)])
            t0 = time.perf_counter()
            res = vpolytope_repair(net, spec, [(0, k)] if k else [], k)
            secs = time.perf_counter() - t0
            final = res.report.stages[-1]
            rows.append({"k": k, "vertices": V, "suffix_neurons": suffix,
                         "constraints": final.n_constraints, "seconds": secs,
                         "status": res.report.status})
            print(f"k={k} V={V:4d} V*N={V * suffix:6d} constraints={final.n_constraints:7d} "
                  f"{secs:7.3f} s  {res.report.status}")
    if args.out:
        write_report({"seed": args.seed, "rows": rows}, args.out)


if __name__ == "__main__":
    main()
