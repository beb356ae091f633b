"""Dense two-phase tableau simplex.

Deterministic: entering column by most negative reduced cost (lowest index on
ties), switching to Bland's rule after a run of degenerate pivots; leaving row
by minimum ratio with ties going to the lowest basic variable index.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = -1, 0, 1

PIVOT_TOL = 1e-9
DEGENERATE_STREAK = 30


class _Outcome:
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


def _standardize(lower, upper):
    """Express ``x = T @ y + shift`` with ``y >= 0``; also return bound rows."""
    n = lower.shape[0]
    rows, cols, vals = [], [], []
    shift = np.zeros(n)
    ub_rows = []            # (y index, bound)
    ny = 0
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if np.isfinite(lo):
            rows.append(j); cols.append(ny); vals.append(1.0)
            shift[j] = lo
            if np.isfinite(hi):
                ub_rows.append((ny, hi - lo))
            ny += 1
        elif np.isfinite(hi):
            rows.append(j); cols.append(ny); vals.append(-1.0)
            shift[j] = hi
            ny += 1
        else:
            rows += [j, j]; cols += [ny, ny + 1]; vals += [1.0, -1.0]
            ny += 2
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n, ny))
    return T, shift, ub_rows


class _Tableau:
    def __init__(self, tab: np.ndarray, basis: np.ndarray):
        self.tab = tab          # m x (N + 1); last column is the right-hand side
        self.basis = basis

    def pivot(self, r: int, e: int, cost: np.ndarray) -> None:
        tab = self.tab
        tab[r] /= tab[r, e]
        col = tab[:, e].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            tab[nz] -= np.outer(col[nz], tab[r])
        cost -= cost[e] * tab[r]
        self.basis[r] = e
        rhs = tab[:, -1]
        np.maximum(rhs, 0.0, out=rhs, where=rhs > -PIVOT_TOL)

    def run(self, cost: np.ndarray, allowed: np.ndarray, dj_tol: float, max_iter: int):
        streak = 0
        it = 0
        tab = self.tab
        while it < max_iter:
            d = np.where(allowed, cost[:-1], 0.0)
            if streak >= DEGENERATE_STREAK:
                cand = np.nonzero(d < -dj_tol)[0]
                if cand.size == 0:
                    return _Outcome.OPTIMAL, it
                e = int(cand[0])
            else:
                e = int(np.argmin(d))
                if d[e] >= -dj_tol:
                    return _Outcome.OPTIMAL, it
            col = tab[:, e]
            pos = np.nonzero(col > PIVOT_TOL)[0]
            if pos.size == 0:
                return _Outcome.UNBOUNDED, it
            ratios = tab[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
            r = int(ties[np.argmin(self.basis[ties])])
            self.pivot(r, e, cost)
            streak = streak + 1 if best <= 1e-12 else 0
            it += 1
        return _Outcome.ITERATION_LIMIT, it


def simplex(c, A, rel, b, lower, upper, feas_tol=1e-7, opt_tol=1e-6, max_iter=None):
    """Minimize ``c @ x`` subject to ``A x rel b`` and ``lower <= x <= upper``.

    Returns ``(outcome, x, iterations)``; ``x`` is ``None`` unless optimal.
    """
    c = np.asarray(c, dtype=np.float64)
    A = sp.csr_matrix(A, dtype=np.float64)
    rel = np.asarray(rel, dtype=np.int8)
    b = np.asarray(b, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if np.any(lower > upper):
        return _Outcome.INFEASIBLE, None, 0

    T, shift, ub_rows = _standardize(lower, upper)
    ny = T.shape[1]
    Ay = (A @ T).toarray()
    by = b - A @ shift
    cy = T.T @ c
    if ub_rows:
        extra = np.zeros((len(ub_rows), ny))
        for i, (j, _) in enumerate(ub_rows):
            extra[i, j] = 1.0
        Ay = np.vstack([Ay, extra])
        by = np.concatenate([by, [u for _, u in ub_rows]])
        rel = np.concatenate([rel, np.full(len(ub_rows), LE, dtype=np.int8)])

    # scale rows and dispose of empty ones
    scale = np.abs(Ay).max(axis=1) if Ay.shape[1] else np.zeros(Ay.shape[0])
    empty = scale == 0.0
    if np.any(empty):
        be = by[empty]
        re = rel[empty]
        bad = ((re == LE) & (be < -feas_tol)) | ((re == GE) & (be > feas_tol)) | (
            (re == EQ) & (np.abs(be) > feas_tol))
        if np.any(bad):
            return _Outcome.INFEASIBLE, None, 0
        Ay, by, rel, scale = Ay[~empty], by[~empty], rel[~empty], scale[~empty]
    Ay = Ay / scale[:, None]
    by = by / scale
    neg = by < 0
    Ay[neg] *= -1.0
    by[neg] *= -1.0
    rel = np.where(neg, -rel, rel)

    m = Ay.shape[0]
    n_slack = int(np.sum(rel != EQ))
    n_art = int(np.sum(rel != LE))
    N = ny + n_slack + n_art
    tab = np.zeros((m, N + 1))
    tab[:, :ny] = Ay
    tab[:, -1] = by
    basis = np.empty(m, dtype=np.int64)
    s = ny
    a = ny + n_slack
    for i in range(m):
        if rel[i] == LE:
            tab[i, s] = 1.0
            basis[i] = s
            s += 1
        else:
            if rel[i] == GE:
                tab[i, s] = -1.0
                s += 1
            tab[i, a] = 1.0
            basis[i] = a
            a += 1
    is_art = np.zeros(N, dtype=bool)
    is_art[ny + n_slack:] = True

    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    dj_tol = min(opt_tol, 1e-6) * 1e-3
    tb = _Tableau(tab, basis)
    iters = 0

    if n_art:
        cost = np.zeros(N + 1)
        cost[:N][is_art] = 1.0
        for i in range(m):
            if is_art[basis[i]]:
                cost -= tab[i]
        outcome, it = tb.run(cost, np.ones(N, dtype=bool), dj_tol, max_iter)
        iters += it
        if outcome == _Outcome.ITERATION_LIMIT:
            return outcome, None, iters
        if -cost[-1] > feas_tol:
            return _Outcome.INFEASIBLE, None, iters
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if not is_art[tb.basis[i]]:
                continue
            row = np.abs(tb.tab[i, :N]) * ~is_art
            j = int(np.argmax(row))
            if row[j] > PIVOT_TOL:
                tb.pivot(i, j, cost)
            else:
                keep[i] = False
        tb.tab = tb.tab[keep]
        tb.basis = tb.basis[keep]

    cost = np.zeros(N + 1)
    cost[:ny] = cy
    for i, j in enumerate(tb.basis):
        if cost[j] != 0.0:
            cost -= cost[j] * tb.tab[i]
    outcome, it = tb.run(cost, ~is_art, dj_tol, max_iter)
    iters += it
    if outcome != _Outcome.OPTIMAL:
        return outcome, None, iters

    y = np.zeros(N)
    y[tb.basis] = tb.tab[:, -1]
    x = T @ y[:ny] + shift
    return _Outcome.OPTIMAL, x, iters
