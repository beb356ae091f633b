"""Command-line entry point: repair, verify, eval and demo subcommands.

Exit codes: 0 success, 1 usage or input error, 2 infeasible repair,
3 verification failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .demos import DEMOS
from .formulas import DEFAULT_MARGIN
from .io import InputError, load_dataset, load_network, load_spec, save_network, write_report
from .metrics import accuracy, drawdown, generalization
from .repair import RepairConfig, vpolytope_repair
from .verify import check_polytope

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3, 4

_STATUS_EXIT = {
    "success": EXIT_OK,
    "infeasible": EXIT_INFEASIBLE,
    "unbounded": EXIT_NUMERIC,
    "numeric_failure": EXIT_NUMERIC,
    "verification_failed": EXIT_VERIFY,
    "invalid_partition": EXIT_INPUT,
}


def parse_partition(text: str) -> list[tuple[int, int]]:
    """``"0:1,1:2"`` to ``[(0, 1), (1, 2)]``; the empty string is the empty schedule."""
    text = text.strip()
    if not text:
        return []
    out = []
    for part in text.split(","):
        try:
            a, b = part.split(":")
            out.append((int(a), int(b)))
        except ValueError:
            raise InputError(f"bad partition entry {part!r}; expected k:l") from None
    return out


def _cmd_repair(args) -> int:
    net = load_network(args.network)
    spec = load_spec(args.spec, args.margin)
    s = parse_partition(args.partition)
    config = RepairConfig(
        ref_strategy=args.ref_strategy, feas_tol=args.feas_tol, opt_tol=args.opt_tol,
        backend=args.backend, verify_samples=args.samples, verify_tol=args.tol,
        seed=args.seed, debug=args.debug, dump_lp=args.dump_lp,
    )
    try:
        spec.check_against(net)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    res = vpolytope_repair(net, spec, s, args.k, config)
    rep = res.report.to_dict()
    if args.report:
        write_report(rep, args.report)
    if res.ok:
        save_network(res.network, args.out)
        print(f"repaired: {len(res.report.edits)} parameters changed, "
              f"objective {res.report.objective:.6g}, {res.report.n_constraints} constraints")
    else:
        print(f"repair failed: {res.report.status} ({res.report.message})")
    return _STATUS_EXIT.get(res.report.status, EXIT_NUMERIC)


def _cmd_verify(args) -> int:
    net = load_network(args.network)
    spec = load_spec(args.spec)
    try:
        rep = check_polytope(net, spec, args.samples, args.tol, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.report:
        write_report(rep.to_dict(), args.report)
    for it in rep.items:
        line = f"item {it.index}: {it.status}"
        if it.witness_input is not None:
            line += f"  witness x={it.witness_input} y={it.witness_output}"
        print(line)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _cmd_eval(args) -> int:
    net = load_network(args.network)
    ds = load_dataset(args.dataset, args.mode)
    try:
        out = {"accuracy": accuracy(net, ds), "rows": len(ds), "mode": args.mode}
        if args.baseline:
            base = load_network(args.baseline)
            out["baseline_accuracy"] = accuracy(base, ds)
            out["drawdown"] = drawdown(base, net, ds)
            out["generalization"] = generalization(base, net, ds)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    for key, val in out.items():
        print(f"{key}: {val}")
    if args.report:
        write_report(out, args.report)
    return EXIT_OK


def _cmd_demo(args) -> int:
    config = RepairConfig(seed=args.seed, backend=args.backend)
    res = DEMOS[args.name](config)
    print(res.table())
    return EXIT_OK if res.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyrepair", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("repair", help="repair a network against a spec")
    r.add_argument("--network", required=True)
    r.add_argument("--spec", required=True)
    r.add_argument("--partition", default="", help='shift schedule, e.g. "0:1,1:2"')
    r.add_argument("--k", type=int, required=True, help="layer whose weights get edited")
    r.add_argument("--ref-strategy", choices=["first-vertex", "centroid"], default="first-vertex")
    r.add_argument("--out", required=True)
    r.add_argument("--report")
    r.add_argument("--dump-lp", metavar="DIR")
    r.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    r.add_argument("--feas-tol", type=float, default=1e-7)
    r.add_argument("--opt-tol", type=float, default=1e-6)
    r.add_argument("--backend", choices=["auto", "simplex", "highs"], default="auto")
    r.add_argument("--samples", type=int, default=256)
    r.add_argument("--tol", type=float, default=1e-6)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--debug", action="store_true")
    r.set_defaults(func=_cmd_repair)

    v = sub.add_parser("verify", help="check a network against a spec")
    v.add_argument("--network", required=True)
    v.add_argument("--spec", required=True)
    v.add_argument("--samples", type=int, default=256)
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report")
    v.set_defaults(func=_cmd_verify)

    e = sub.add_parser("eval", help="accuracy, drawdown and generalization on a dataset")
    e.add_argument("--network", required=True)
    e.add_argument("--baseline")
    e.add_argument("--dataset", required=True)
    e.add_argument("--mode", choices=["argmax", "argmin"], default="argmax")
    e.add_argument("--report")
    e.set_defaults(func=_cmd_eval)

    d = sub.add_parser("demo", help="run a bundled scenario")
    d.add_argument("name", choices=sorted(DEMOS))
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--backend", choices=["auto", "simplex", "highs"], default="auto")
    d.set_defaults(func=_cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
