"""Shift-and-assert repair over polytopes, with pointwise repair as the singleton case."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .formulas import OutputFormula, RepairSpec
from .lp import LPProblem, SolveStatus, build_delta_objective, solve
from .nn import Network, VPolytope, concat, forward_batch, param_diff, same_architecture
from .symbolic import (
    REF_STRATEGIES,
    LinearFormula,
    VarRegistry,
    calc_ref,
    cond_forward_lifted,
    make_symbolic_slice,
)
from .verify import PIECE_TOL, check_polytope, is_locally_linear

Partition = list[tuple[int, int]]


@dataclass
class RepairConfig:
    ref_strategy: str = "first-vertex"
    eps_strict: float = 0.0
    feas_tol: float = 1e-7
    opt_tol: float = 1e-6
    backend: str = "auto"
    verify_samples: int = 256
    verify_tol: float = 1e-6
    piece_tol: float = PIECE_TOL
    seed: int = 0
    debug: bool = False
    dump_lp: str | None = None
    compact_linf: bool = True

    def __post_init__(self):
        if self.ref_strategy not in REF_STRATEGIES:
            raise ValueError(f"unknown reference strategy {self.ref_strategy!r}")
        if self.eps_strict < 0:
            raise ValueError("eps_strict must be non-negative")


@dataclass
class StageReport:
    stage: int
    k: int
    l: int
    asserts_spec: bool
    status: str
    n_vars: int = 0
    n_params: int = 0
    n_activation_constraints: int = 0
    n_spec_constraints: int = 0
    n_delta_constraints: int = 0
    n_lifting_constraints: int = 0
    objective: float | None = None
    backend: str = ""
    build_seconds: float = 0.0
    solve_seconds: float = 0.0
    message: str = ""

    @property
    def n_constraints(self) -> int:
        return (self.n_activation_constraints + self.n_spec_constraints
                + self.n_delta_constraints + self.n_lifting_constraints)


@dataclass
class RepairReport:
    status: str = "pending"
    s: list[tuple[int, int]] = field(default_factory=list)
    k: int = 0
    stages: list[StageReport] = field(default_factory=list)
    failed_stage: int | None = None
    objective: float | None = None
    edits: list[dict] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    verify: dict | None = None
    config: dict = field(default_factory=dict)
    version: str = __version__
    message: str = ""

    @property
    def n_constraints(self) -> int:
        return sum(st.n_constraints for st in self.stages)

    @property
    def n_vars(self) -> int:
        return sum(st.n_vars for st in self.stages)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s"] = [list(t) for t in self.s]
        d["n_constraints"] = self.n_constraints
        d["n_vars"] = self.n_vars
        for st, sd in zip(self.stages, d["stages"]):
            sd["n_constraints"] = st.n_constraints
        return d


@dataclass
class RepairResult:
    network: Network | None
    report: RepairReport

    @property
    def ok(self) -> bool:
        return self.network is not None


# --------------------------------------------------------------------------- partitions


def validate_partition(net: Network, s: Sequence[tuple[int, int]], k: int,
                       polys: Sequence[VPolytope], piece_tol: float = PIECE_TOL) -> str | None:
    """``None`` when the schedule is usable, else a description of the first problem."""
    L = len(net)
    if not 0 <= k < L:
        return f"repair layer k={k} outside [0, {L})"
    for i, (ki, li) in enumerate(s):
        if not 0 <= ki < li <= L:
            return f"stage {i}: need 0 <= k_i < l_i <= {L}, got ({ki}, {li})"
    for i in range(len(s) - 1):
        if s[i + 1][0] > s[i][1]:
            return f"stage {i + 1}: k_{i + 1}={s[i + 1][0]} exceeds l_{i}={s[i][1]}"
    if s and k > s[-1][1]:
        return f"repair layer k={k} exceeds last shifted prefix end l={s[-1][1]}"
    prefix_end = s[0][0] if s else k
    if prefix_end > 0:
        prefix = net.slice(0, prefix_end)
        for j, p in enumerate(polys):
            lin = is_locally_linear(prefix, p, piece_tol)
            if not lin:
                w = lin.witness
                return (f"layers [0, {prefix_end}) are not locally linear on polytope {j} "
                        f"(layer {w.layer}, neuron {w.neuron})")
    return None


# --------------------------------------------------------------------------- shift and assert


def _ensure_formulas(psi, n: int) -> list[OutputFormula] | None:
    if psi is None:
        return None
    psi = list(psi)
    if len(psi) != n:
        raise ValueError("need exactly one output formula per polytope")
    return psi


def shift_and_assert(net: Network, net_og: Network, polys: Sequence[VPolytope],
                     psi: Sequence[OutputFormula] | None, k: int,
                     config: RepairConfig | None = None, stage: int = 0,
                     l: int | None = None) -> tuple[Network | None, StageReport]:
    """One LP stage: make layers ``[k, L)`` symbolic and solve.

    ``psi=None`` asserts nothing beyond the activation pattern (a pure shift).
    Output deltas are measured against ``net_og`` on the original polytopes.
    """
    config = config or RepairConfig()
    L = len(net)
    report = StageReport(stage, k, L if l is None else l, psi is not None, "pending")
    formulas = _ensure_formulas(psi, len(polys))
    if not 0 <= k < L:
        raise ValueError(f"symbolic layer {k} outside [0, {L})")
    t0 = time.perf_counter()

    if not polys:
        report.status = "optimal"
        report.objective = 0.0
        return net, report

    verts = np.vstack([p.vertices for p in polys])
    counts = [len(p) for p in polys]
    if k > 0:
        prefix = net.slice(0, k)
        if config.debug:
            for j, p in enumerate(polys):
                if not is_locally_linear(prefix, p, config.piece_tol):
                    raise AssertionError(f"prefix [0, {k}) not locally linear on polytope {j}")
        shifted = forward_batch(prefix, verts)
    else:
        shifted = verts

    refs = []
    start = 0
    for c in counts:
        ref = calc_ref(shifted[start:start + c], config.ref_strategy)
        refs.append(np.broadcast_to(ref, (c, shifted.shape[1])))
        start += c
    refs = np.vstack(refs)

    registry = VarRegistry()
    sym = make_symbolic_slice(net.slice(k, L), registry, offset=k)
    params = [(int(v), val) for v, _, val in registry.params()]
    fw = cond_forward_lifted(sym, shifted, refs, config.eps_strict)
    m = net.output_dim

    spec_parts = []
    if formulas is not None:
        start = 0
        for c, f in zip(counts, formulas):
            rows = slice(start * m, (start + c) * m)
            spec_parts.append(f.on_rows(fw.outputs[rows], fw.const[rows], m))
            start += c
    spec_formula = LinearFormula.conjoin(spec_parts)

    targets = forward_batch(net_og, verts)
    delta = build_delta_objective((fw.outputs, fw.const), targets, params, registry,
                                  config.compact_linf)
    constraints = LinearFormula.conjoin(
        [fw.activation, fw.lifting, spec_formula, delta.constraints])
    problem = LPProblem.from_registry(registry, constraints, delta.objective)

    report.n_vars = len(registry)
    report.n_params = sym.n_params()
    report.n_activation_constraints = len(fw.activation)
    report.n_lifting_constraints = len(fw.lifting)
    report.n_spec_constraints = len(spec_formula)
    report.n_delta_constraints = len(delta.constraints)
    report.build_seconds = time.perf_counter() - t0

    dump = Path(config.dump_lp) / f"stage{stage}.lp" if config.dump_lp else None
    res = solve(problem, config.feas_tol, config.opt_tol, config.backend, dump)
    report.solve_seconds = res.seconds
    report.backend = res.backend
    report.status = res.status.value
    report.message = res.message
    if res.status is not SolveStatus.OPTIMAL:
        return None, report
    report.objective = res.objective
    suffix = sym.update(res.x)
    out = concat(net.slice(0, k), suffix) if k > 0 else suffix
    return out, report


# --------------------------------------------------------------------------- full repair


def _fail(report: RepairReport, status: str, message: str, stage: int | None = None):
    report.status = status
    report.message = message
    report.failed_stage = stage
    return RepairResult(None, report)


def vpolytope_repair(net: Network, spec: RepairSpec, s: Sequence[tuple[int, int]], k: int,
                     config: RepairConfig | None = None) -> RepairResult:
    """Shift each prefix in ``s`` into linearity, then assert the spec at layer ``k``.

    The result is re-verified on every hull; a network that fails that check
    is never returned.
    """
    config = config or RepairConfig()
    s = [(int(a), int(b)) for a, b in s]
    report = RepairReport(s=s, k=k, config=asdict(config))
    t_start = time.perf_counter()
    spec.check_against(net)
    polys = spec.polytopes

    problem = validate_partition(net, s, k, polys, config.piece_tol)
    if problem is not None:
        return _fail(report, "invalid_partition", problem)
    if len(spec) == 0:
        report.status = "success"
        report.objective = 0.0
        report.timings["total"] = time.perf_counter() - t_start
        return RepairResult(net, report)

    L = len(net)
    current = net
    for i, (ki, li) in enumerate(s):
        head, st = shift_and_assert(current.slice(0, li), net.slice(0, li), polys, None, ki,
                                    config, stage=i, l=li)
        report.stages.append(st)
        if head is None:
            return _fail(report, st.status, f"shift stage {i} returned {st.status}", i)
        current = concat(head, current.slice(li, L)) if li < L else head

    final, st = shift_and_assert(current, net, polys, spec.formulas, k, config,
                                 stage=len(s), l=L)
    report.stages.append(st)
    if final is None:
        return _fail(report, st.status, f"final stage returned {st.status}", len(s))
    report.objective = st.objective
    report.timings["lp"] = sum(x.build_seconds + x.solve_seconds for x in report.stages)

    t_verify = time.perf_counter()
    ver = check_polytope(final, spec, config.verify_samples, config.verify_tol,
                         config.seed, config.piece_tol)
    report.timings["verify"] = time.perf_counter() - t_verify
    report.verify = ver.to_dict()
    report.timings["total"] = time.perf_counter() - t_start
    if not ver.certified:
        return _fail(report, "verification_failed",
                     f"independent check: {ver.counts()}", len(s))
    assert same_architecture(net, final)
    report.edits = [{"param": str(a), "old": old, "new": new}
                    for a, old, new in param_diff(net, final)]
    report.status = "success"
    return RepairResult(final, report)


def pointwise_repair(net: Network, points: Sequence, psi: Sequence[OutputFormula], k: int,
                     config: RepairConfig | None = None) -> RepairResult:
    """Repair on finitely many points: singleton polytopes with no shift stages."""
    points = list(points)
    if not points:
        return vpolytope_repair(net, RepairSpec(()), [], k, config)
    return vpolytope_repair(net, RepairSpec.pointwise(points, psi), [], k, config)
