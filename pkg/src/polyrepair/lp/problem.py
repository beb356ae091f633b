"""LP problems over registry variables, the delta-norm objective, and ``solve``."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..symbolic import (
    AffineExpr,
    GE,
    LinearFormula,
    SymbolicBatch,
    SymbolicPoint,
    VarRegistry,
    _slack,
)
from . import simplex as _simplex

BACKENDS = ("auto", "simplex", "highs")
# dense tableau entries above which "auto" hands the problem to HiGHS
AUTO_DENSE_LIMIT = 300_000
HIGHS_IPM_ROWS = 5_000


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass
class LPProblem:
    """Minimize ``objective`` subject to ``constraints`` and per-variable bounds.

    Variables are ``0 .. n_vars-1``; unspecified bounds mean free.
    """

    n_vars: int
    constraints: LinearFormula
    objective: AffineExpr
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    names: Sequence[str] | None = None

    def __post_init__(self):
        if self.lower is None:
            self.lower = np.full(self.n_vars, -np.inf)
        if self.upper is None:
            self.upper = np.full(self.n_vars, np.inf)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.constraints.n_vars > self.n_vars:
            raise ValueError("constraints reference unregistered variables")
        if self.objective.terms and max(self.objective.terms) >= self.n_vars:
            raise ValueError("objective references unregistered variables")

    @classmethod
    def from_registry(cls, registry: VarRegistry, constraints: LinearFormula,
                      objective: AffineExpr, lower=None, upper=None) -> "LPProblem":
        n = len(registry)
        return cls(n, constraints, objective, lower, upper,
                   [registry.name(i) for i in range(n)])

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def cost_vector(self) -> np.ndarray:
        return self.objective.to_dense(self.n_vars)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation at ``x`` (0 when feasible)."""
        worst = 0.0
        if len(self.constraints):
            A, rel, rhs = self.constraints.matrix(self.n_vars)
            worst = max(worst, float(np.max(-_slack(A @ x, rel, rhs), initial=0.0)))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.upper, initial=0.0)))
        return worst


@dataclass
class SolveResult:
    status: SolveStatus
    x: np.ndarray | None = None
    objective: float | None = None
    backend: str = ""
    iterations: int = 0
    seconds: float = 0.0
    max_violation: float | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def assignment(self) -> dict[int, float]:
        if self.x is None:
            return {}
        return {i: float(v) for i, v in enumerate(self.x)}


# --------------------------------------------------------------------------- delta objective


@dataclass
class DeltaObjective:
    objective: AffineExpr
    constraints: LinearFormula
    linf_var: int
    l1_vars: np.ndarray
    n_delta: int = field(default=0)


def _delta_rows(sym_outputs, target_outputs, sym_params, n_vars):
    if isinstance(sym_outputs, tuple):
        E, const = sym_outputs
        out_rows = sp.csr_matrix((E.data, E.indices, E.indptr), shape=(E.shape[0], n_vars))
    else:
        if isinstance(sym_outputs, SymbolicBatch):
            coeffs, const = sym_outputs.rows()
        else:
            pts = list(sym_outputs)
            if pts:
                coeffs = np.vstack([np.pad(p.coeffs, ((0, 0), (0, n_vars - p.coeffs.shape[1])))
                                    for p in pts])
                const = np.concatenate([p.const for p in pts])
            else:
                coeffs, const = np.zeros((0, n_vars)), np.zeros(0)
        coeffs = np.pad(coeffs, ((0, 0), (0, max(0, n_vars - coeffs.shape[1]))))
        out_rows = sp.csr_matrix(coeffs[:, :n_vars])
    target = np.asarray(target_outputs, dtype=np.float64).reshape(-1)
    if target.shape[0] != const.shape[0]:
        raise ValueError(
            f"{const.shape[0]} symbolic output entries but {target.shape[0]} targets"
        )
    params = list(sym_params)
    pv = np.array([v for v, _ in params], dtype=np.int64)
    p0 = np.array([val for _, val in params], dtype=np.float64)
    par_rows = sp.csr_matrix((np.ones(pv.size), (np.arange(pv.size), pv)),
                             shape=(pv.size, n_vars))
    D = sp.vstack([out_rows, par_rows], format="csr")
    offset = np.concatenate([const - target, -p0])
    return D, offset


def build_delta_objective(sym_outputs: SymbolicBatch | Sequence[SymbolicPoint] | tuple,
                          target_outputs, sym_params: Sequence[tuple[int, float]],
                          registry: VarRegistry, compact_linf: bool = False) -> DeltaObjective:
    """Combined L-infinity plus normalized L1 objective over the delta vector.

    Each delta entry ``d_i = D_i x + offset_i`` gets ``t >= +-d_i`` and
    ``s_i >= +-d_i``; the objective is ``t + sum(s) / n``.  ``sym_outputs`` may
    also be a ``(sparse rows, constants)`` pair.
    """
    n_before = len(registry)
    D, offset = _delta_rows(sym_outputs, target_outputs, sym_params, n_before)
    n = D.shape[0]
    t = registry.new_aux("delta_linf")
    s = registry.new_aux_block("delta_l1", n)
    width = len(registry)
    if n == 0:
        return DeltaObjective(AffineExpr.var(t), LinearFormula(), t, s, 0)
    Dw = sp.csr_matrix((D.data, D.indices, D.indptr), shape=(n, width))
    t_col = sp.csr_matrix((np.ones(n), (np.arange(n), np.full(n, t))), shape=(n, width))
    s_col = sp.csr_matrix((np.ones(n), (np.arange(n), s)), shape=(n, width))
    # s - d >= 0 and s + d >= 0 give s_i >= |d_i|
    blocks = [LinearFormula.from_rows(s_col - Dw, GE, offset),
              LinearFormula.from_rows(s_col + Dw, GE, -offset)]
    if compact_linf:
        # t >= s_i >= |d_i|; same optimum, and only two rows per entry carry d_i
        blocks.append(LinearFormula.from_rows(t_col - s_col, GE, 0.0))
    else:
        blocks += [LinearFormula.from_rows(t_col - Dw, GE, offset),
                   LinearFormula.from_rows(t_col + Dw, GE, -offset)]
    objective = AffineExpr({t: 1.0, **{int(v): 1.0 / n for v in s}})
    return DeltaObjective(objective, LinearFormula.conjoin(blocks), t, s, n)


# --------------------------------------------------------------------------- solving


def _solve_simplex(p: LPProblem, feas_tol, opt_tol):
    A, rel, rhs = p.constraints.matrix(p.n_vars)
    outcome, x, iters = _simplex.simplex(p.cost_vector(), A, rel, rhs, p.lower, p.upper,
                                         feas_tol=feas_tol, opt_tol=opt_tol)
    status = {
        _simplex._Outcome.OPTIMAL: SolveStatus.OPTIMAL,
        _simplex._Outcome.INFEASIBLE: SolveStatus.INFEASIBLE,
        _simplex._Outcome.UNBOUNDED: SolveStatus.UNBOUNDED,
    }.get(outcome, SolveStatus.NUMERIC_FAILURE)
    return status, x, iters, "" if status is not SolveStatus.NUMERIC_FAILURE else outcome


def _solve_highs(p: LPProblem, feas_tol, opt_tol):
    from scipy.optimize import linprog

    A, rel, rhs = p.constraints.matrix(p.n_vars)
    le = rel == _simplex.LE
    ge = rel == _simplex.GE
    eq = rel == _simplex.EQ
    A_ub = sp.vstack([A[le], -A[ge]], format="csr")
    b_ub = np.concatenate([rhs[le], -rhs[ge]])
    kwargs = {}
    if A_ub.shape[0]:
        kwargs.update(A_ub=A_ub, b_ub=b_ub)
    if np.any(eq):
        kwargs.update(A_eq=A[eq], b_eq=rhs[eq])
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(p.lower, p.upper)]
    # interior point (with crossover to a vertex) wins clearly on the large, dense-ish repair LPs
    method = "highs-ipm" if A.shape[0] > HIGHS_IPM_ROWS else "highs-ds"
    res = linprog(
        p.cost_vector(), bounds=bounds, method=method,
        options={
            "primal_feasibility_tolerance": min(1e-9, feas_tol),
            "dual_feasibility_tolerance": min(1e-9, opt_tol),
            "presolve": True,
        },
        **kwargs,
    )
    status = {
        0: SolveStatus.OPTIMAL,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
    }.get(res.status, SolveStatus.NUMERIC_FAILURE)
    x = np.asarray(res.x, dtype=np.float64) if status is SolveStatus.OPTIMAL else None
    return status, x, int(getattr(res, "nit", 0) or 0), res.message


def pick_backend(p: LPProblem, backend: str) -> str:
    if backend not in BACKENDS:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {BACKENDS}")
    if backend != "auto":
        return backend
    # rough size of the tableau after free-variable splitting and slacks
    m = p.n_constraints
    cols = 2 * p.n_vars + 2 * m
    return "simplex" if m * cols <= AUTO_DENSE_LIMIT else "highs"


def solve(p: LPProblem, feas_tol: float = 1e-7, opt_tol: float = 1e-6,
          backend: str = "auto", dump_path: str | Path | None = None) -> SolveResult:
    """Solve ``p``; an optimal answer is re-checked against every constraint."""
    chosen = pick_backend(p, backend)
    if dump_path is not None:
        write_lp(p, dump_path)
    t0 = time.perf_counter()
    try:
        if chosen == "simplex":
            status, x, iters, msg = _solve_simplex(p, feas_tol, opt_tol)
        else:
            status, x, iters, msg = _solve_highs(p, feas_tol, opt_tol)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        return SolveResult(SolveStatus.NUMERIC_FAILURE, backend=chosen,
                           seconds=time.perf_counter() - t0, message=str(exc))
    secs = time.perf_counter() - t0
    if status is not SolveStatus.OPTIMAL:
        return SolveResult(status, backend=chosen, iterations=iters, seconds=secs,
                           message=str(msg))
    viol = p.violation(x)
    if not np.all(np.isfinite(x)) or viol > feas_tol:
        return SolveResult(SolveStatus.NUMERIC_FAILURE, backend=chosen, iterations=iters,
                           seconds=secs, max_violation=viol,
                           message=f"solution violates constraints by {viol:.3g}")
    obj = float(p.cost_vector() @ x + p.objective.constant)
    return SolveResult(SolveStatus.OPTIMAL, x, obj, chosen, iters, secs, viol)


# --------------------------------------------------------------------------- LP text dump


def _fmt_terms(items) -> str:
    out = []
    for v, c in items:
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {abs(c)!r} x{v}")
    if not out:
        return "0 x0"
    s = " ".join(out)
    return s[2:] if s.startswith("+ ") else s


def write_lp(p: LPProblem, path: str | Path) -> None:
    """Write ``p`` in CPLEX LP text format; variable ``xi`` is registry id ``i``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\\ repair LP"]
    if p.names is not None:
        for i, name in enumerate(p.names):
            lines.append(f"\\ x{i} = {name}")
    lines += ["Minimize", " obj: " + _fmt_terms(sorted(p.objective.terms.items())), "Subject To"]
    A, rel, rhs = p.constraints.matrix(p.n_vars)
    ops = {-1: "<=", 0: "=", 1: ">="}
    for i in range(A.shape[0]):
        row = A.getrow(i)
        terms = _fmt_terms(zip(row.indices.tolist(), row.data.tolist()))
        lines.append(f" c{i}: {terms} {ops[int(rel[i])]} {float(rhs[i])!r}")
    lines.append("Bounds")
    for i in range(p.n_vars):
        lo, hi = p.lower[i], p.upper[i]
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" x{i} free")
        elif np.isfinite(lo) and np.isfinite(hi):
            lines.append(f" {float(lo)!r} <= x{i} <= {float(hi)!r}")
        elif np.isfinite(lo):
            lines.append(f" x{i} >= {float(lo)!r}")
        else:
            lines.append(f" -inf <= x{i} <= {float(hi)!r}")
    lines.append("End")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
