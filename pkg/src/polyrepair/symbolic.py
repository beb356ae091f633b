"""Affine expressions over parameter variables and conditional symbolic execution.

Two views of the same objects live here.  ``AffineExpr`` / ``LinearConstraint``
are the sparse, one-expression-at-a-time view used in tests, reports and small
examples.  Bulk propagation through a network works on coefficient arrays
(``SymbolicPoint``, ``SymbolicBatch``, ``LinearFormula`` blocks) where column
``i`` holds the coefficient of variable ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from numbers import Real
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .nn import ActivationKind, Network, ParamAddress, VPolytope, apply_activation

_CONST_EPS = 1e-15


# --------------------------------------------------------------------------- variables


class VarRegistry:
    """Hands out integer variable ids and remembers what each one stands for."""

    def __init__(self):
        self._roles: list = []
        self._values: list[float] = []

    def __len__(self) -> int:
        return len(self._roles)

    def new_param(self, addr: ParamAddress, value: float) -> int:
        self._roles.append(addr)
        self._values.append(float(value))
        return len(self._roles) - 1

    def new_aux(self, name: str) -> int:
        self._roles.append(name)
        self._values.append(0.0)
        return len(self._roles) - 1

    def new_aux_block(self, name: str, n: int) -> np.ndarray:
        start = len(self._roles)
        self._roles.extend(f"{name}[{i}]" for i in range(n))
        self._values.extend([0.0] * n)
        return np.arange(start, start + n)

    def role(self, var: int):
        return self._roles[var]

    def is_param(self, var: int) -> bool:
        return isinstance(self._roles[var], ParamAddress)

    def original_values(self) -> np.ndarray:
        """Original parameter value per variable; auxiliaries read as 0."""
        return np.array(self._values, dtype=np.float64)

    def params(self) -> list[tuple[int, ParamAddress, float]]:
        return [
            (i, r, self._values[i])
            for i, r in enumerate(self._roles)
            if isinstance(r, ParamAddress)
        ]

    def name(self, var: int) -> str:
        role = self._roles[var]
        return str(role) if isinstance(role, ParamAddress) else role


def assignment_vector(a, n: int, needed: Iterable[int] = ()) -> np.ndarray:
    """Dense vector from a ``{var: value}`` mapping or an array.

    Raises ``KeyError`` if any id in ``needed`` is unbound.
    """
    if isinstance(a, Mapping):
        vec = np.zeros(n)
        for v in needed:
            if v not in a:
                raise KeyError(f"unbound variable v{v}")
        for v, val in a.items():
            if 0 <= v < n:
                vec[v] = val
        return vec
    arr = np.asarray(a, dtype=np.float64)
    missing = [v for v in needed if v >= arr.shape[0]]
    if missing:
        raise KeyError(f"unbound variable v{missing[0]}")
    if arr.shape[0] >= n:
        return arr[:n]
    return np.concatenate([arr, np.zeros(n - arr.shape[0])])


# --------------------------------------------------------------------------- expressions


class AffineExpr:
    """``sum(coeff * var) + constant``.  Multiplying two expressions is refused."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[int, float] | None = None, constant: float = 0.0):
        self.terms = {int(k): float(v) for k, v in (terms or {}).items() if v != 0.0}
        c = float(constant)
        self.constant = 0.0 if abs(c) < _CONST_EPS else c
        if not all(np.isfinite(v) for v in self.terms.values()) or not np.isfinite(self.constant):
            raise ValueError("affine expression coefficients must be finite")

    @classmethod
    def var(cls, v: int, coeff: float = 1.0) -> "AffineExpr":
        return cls({v: coeff})

    @classmethod
    def const(cls, c: float) -> "AffineExpr":
        return cls({}, c)

    @classmethod
    def from_dense(cls, row, constant: float = 0.0) -> "AffineExpr":
        row = np.asarray(row, dtype=np.float64)
        nz = np.nonzero(row)[0]
        return cls(dict(zip(nz.tolist(), row[nz].tolist())), constant)

    def to_dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for v, c in self.terms.items():
            out[v] = c
        return out

    @property
    def variables(self) -> set[int]:
        return set(self.terms)

    def _combine(self, other, sign: float) -> "AffineExpr":
        if isinstance(other, Real):
            return AffineExpr(self.terms, self.constant + sign * float(other))
        if not isinstance(other, AffineExpr):
            return NotImplemented
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms.get(v, 0.0) + sign * c
        return AffineExpr(terms, self.constant + sign * other.constant)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self * -1.0

    def __mul__(self, k):
        if not isinstance(k, Real):
            # products of symbolic terms would leave the linear fragment
            return NotImplemented
        k = float(k)
        return AffineExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        if not isinstance(k, Real):
            return NotImplemented
        return self * (1.0 / float(k))

    def __eq__(self, other):
        if isinstance(other, Real):
            other = AffineExpr.const(float(other))
        if not isinstance(other, AffineExpr):
            return NotImplemented
        return self.terms == other.terms and self.constant == other.constant

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.constant))

    def isclose(self, other: "AffineExpr", atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(
            abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= atol for k in keys
        ) and abs(self.constant - other.constant) <= atol

    def eval(self, a) -> float:
        return eval_expr(self, a)

    def __repr__(self):
        parts = [f"{c:+g}*v{v}" for v, c in sorted(self.terms.items())]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


def eval_expr(e: AffineExpr, a) -> float:
    """Value of ``e`` under assignment ``a`` (mapping or array indexed by var id)."""
    total = e.constant
    if isinstance(a, Mapping):
        for v, c in e.terms.items():
            if v not in a:
                raise KeyError(f"unbound variable v{v}")
            total += c * a[v]
        return float(total)
    arr = np.asarray(a, dtype=np.float64)
    for v, c in e.terms.items():
        if v >= arr.shape[0]:
            raise KeyError(f"unbound variable v{v}")
        total += c * arr[v]
    return float(total)


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="

    @property
    def code(self) -> int:
        return _REL_CODE[self]

    @classmethod
    def parse(cls, s) -> "Relation":
        if isinstance(s, Relation):
            return s
        table = {"<=": cls.LE, "<": cls.LE, ">=": cls.GE, ">": cls.GE, "=": cls.EQ, "==": cls.EQ}
        try:
            return table[str(s).strip()]
        except KeyError:
            raise ValueError(f"unknown relation {s!r}") from None


LE, EQ, GE = -1, 0, 1
_REL_CODE = {Relation.LE: LE, Relation.EQ: EQ, Relation.GE: GE}
_CODE_REL = {v: k for k, v in _REL_CODE.items()}


def _slack(lhs: np.ndarray, rel: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Non-negative exactly when the constraint holds."""
    diff = lhs - rhs
    return np.where(rel == GE, diff, np.where(rel == LE, -diff, -np.abs(diff)))


@dataclass(frozen=True)
class LinearConstraint:
    expr: AffineExpr
    rel: Relation
    rhs: float = 0.0

    def slack(self, a) -> float:
        lhs = eval_expr(self.expr, a)
        return float(_slack(np.array(lhs), np.array(self.rel.code), np.array(self.rhs)))

    def holds(self, a, tol: float = 0.0) -> bool:
        return self.slack(a) >= -tol

    def __repr__(self):
        return f"{self.expr!r} {self.rel.value} {self.rhs:g}"


class LinearFormula:
    """A conjunction of linear constraints, stored as sparse row blocks.

    An empty formula is ``true``.  Each row reads ``A[i] @ x  rel[i]  rhs[i]``.
    """

    def __init__(self, blocks: Sequence[tuple[sp.csr_matrix, np.ndarray, np.ndarray]] = ()):
        self._blocks = [b for b in blocks if b[0].shape[0] > 0]

    @classmethod
    def top(cls) -> "LinearFormula":
        return cls()

    @classmethod
    def from_rows(cls, A, rel, rhs) -> "LinearFormula":
        A = sp.csr_matrix(A, dtype=np.float64)
        rel = np.broadcast_to(np.asarray(rel, dtype=np.int8), (A.shape[0],)).copy()
        rhs = np.broadcast_to(np.asarray(rhs, dtype=np.float64), (A.shape[0],)).copy()
        return cls([(A, rel, rhs)])

    @classmethod
    def of(cls, constraints: Iterable[LinearConstraint]) -> "LinearFormula":
        constraints = list(constraints)
        if not constraints:
            return cls()
        width = 1 + max((max(c.expr.terms, default=-1) for c in constraints), default=-1)
        rows, cols, vals = [], [], []
        for i, c in enumerate(constraints):
            for v, k in c.expr.terms.items():
                rows.append(i)
                cols.append(v)
                vals.append(k)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(constraints), max(width, 0)))
        rel = np.array([c.rel.code for c in constraints], dtype=np.int8)
        rhs = np.array([c.rhs - c.expr.constant for c in constraints])
        return cls([(A, rel, rhs)])

    def __and__(self, other: "LinearFormula | LinearConstraint") -> "LinearFormula":
        if isinstance(other, LinearConstraint):
            other = LinearFormula.of([other])
        if not isinstance(other, LinearFormula):
            return NotImplemented
        return LinearFormula(self._blocks + other._blocks)

    @staticmethod
    def conjoin(formulas: Iterable["LinearFormula"]) -> "LinearFormula":
        blocks = []
        for f in formulas:
            blocks.extend(f._blocks)
        return LinearFormula(blocks)

    def __len__(self) -> int:
        return sum(b[0].shape[0] for b in self._blocks)

    @property
    def n_vars(self) -> int:
        return max((b[0].shape[1] for b in self._blocks), default=0)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for A, _, _ in self._blocks:
            out.update(np.unique(A.indices).tolist())
        return out

    def matrix(self, n: int | None = None) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        """Stack every block into one ``(A, rel, rhs)`` triple with ``n`` columns."""
        n = self.n_vars if n is None else n
        if n < self.n_vars:
            raise ValueError("requested fewer columns than the formula uses")
        if not self._blocks:
            return sp.csr_matrix((0, n)), np.zeros(0, dtype=np.int8), np.zeros(0)
        mats = []
        for A, _, _ in self._blocks:
            A = A.tocsr()
            mats.append(sp.csr_matrix((A.data, A.indices, A.indptr), shape=(A.shape[0], n)))
        return (
            sp.vstack(mats, format="csr"),
            np.concatenate([b[1] for b in self._blocks]),
            np.concatenate([b[2] for b in self._blocks]),
        )

    @property
    def conjuncts(self) -> list[LinearConstraint]:
        A, rel, rhs = self.matrix()
        out = []
        for i in range(A.shape[0]):
            row = A.getrow(i)
            expr = AffineExpr(dict(zip(row.indices.tolist(), row.data.tolist())))
            out.append(LinearConstraint(expr, _CODE_REL[int(rel[i])], float(rhs[i])))
        return out

    def __iter__(self) -> Iterator[LinearConstraint]:
        return iter(self.conjuncts)

    def slacks(self, a) -> np.ndarray:
        A, rel, rhs = self.matrix()
        x = assignment_vector(a, A.shape[1], self.variables() if isinstance(a, Mapping) else ())
        return _slack(A @ x, rel, rhs)

    def satisfies(self, a, tol: float = 0.0) -> bool:
        if len(self) == 0:
            return True
        return bool(np.all(self.slacks(a) >= -tol))

    def __repr__(self):
        if not self._blocks:
            return "LinearFormula(true)"
        return "LinearFormula(" + " & ".join(repr(c) for c in self.conjuncts) + ")"


def satisfies(f: LinearFormula, a, tol: float = 0.0) -> bool:
    return f.satisfies(a, tol)


# --------------------------------------------------------------------------- symbolic points


class SymbolicPoint:
    """A vector of affine expressions, stored as ``coeffs @ x + const``."""

    def __init__(self, coeffs: np.ndarray, const: np.ndarray):
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.const = np.asarray(const, dtype=np.float64)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != self.const.shape[0]:
            raise ValueError("coefficient matrix and constant vector disagree")

    @classmethod
    def of(cls, exprs: Sequence[AffineExpr | float]) -> "SymbolicPoint":
        exprs = [e if isinstance(e, AffineExpr) else AffineExpr.const(e) for e in exprs]
        n = 1 + max((max(e.terms, default=-1) for e in exprs), default=-1)
        return cls(
            np.array([e.to_dense(n) for e in exprs]).reshape(len(exprs), n),
            np.array([e.constant for e in exprs]),
        )

    @classmethod
    def concrete(cls, x, n_vars: int = 0) -> "SymbolicPoint":
        x = np.asarray(x, dtype=np.float64)
        return cls(np.zeros((x.shape[0], n_vars)), x)

    def __len__(self) -> int:
        return self.const.shape[0]

    def __getitem__(self, i: int) -> AffineExpr:
        return AffineExpr.from_dense(self.coeffs[i], self.const[i])

    @property
    def exprs(self) -> list[AffineExpr]:
        return [self[i] for i in range(len(self))]

    def evaluate(self, a) -> np.ndarray:
        needed = np.nonzero(np.any(self.coeffs != 0, axis=0))[0]
        x = assignment_vector(a, self.coeffs.shape[1], needed.tolist() if isinstance(a, Mapping) else ())
        return self.coeffs @ x + self.const

    def __repr__(self):
        return "SymbolicPoint([" + ", ".join(repr(e) for e in self.exprs) + "])"


class SymbolicBatch(Sequence[SymbolicPoint]):
    """Symbolic images of several points: ``coeffs[v] @ x + const[v]``."""

    def __init__(self, coeffs: np.ndarray, const: np.ndarray):
        self.coeffs = coeffs
        self.const = const

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SymbolicBatch(self.coeffs[i], self.const[i])
        return SymbolicPoint(self.coeffs[i], self.const[i])

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n_vars(self) -> int:
        return self.coeffs.shape[2]

    def evaluate(self, a) -> np.ndarray:
        x = assignment_vector(a, self.n_vars)
        return self.coeffs @ x + self.const

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten to ``(V*dim, n_vars)`` coefficients and ``(V*dim,)`` constants."""
        V, d, n = self.coeffs.shape
        return self.coeffs.reshape(V * d, n), self.const.reshape(V * d)


# --------------------------------------------------------------------------- conditional activations


def _conditional(kind: ActivationKind, coeffs: np.ndarray, const: np.ndarray,
                 ref: np.ndarray, eps_strict: float = 0.0):
    """Pin every (point, neuron) to the linear piece selected by ``ref``.

    ``coeffs`` has shape ``(V, n, nvars)``; ``const`` and ``ref`` are ``(V, n)``.
    Returns the new coefficients/constants, the formula and the on-mask.
    """
    if kind is ActivationKind.IDENTITY:
        return coeffs, const, LinearFormula(), np.ones(const.shape, dtype=bool)
    on = ref >= 0.0
    if kind is ActivationKind.RELU:
        on_thr, off_thr = 0.0, -eps_strict
    elif kind is ActivationKind.HARDSWISH:
        on_thr, off_thr = 3.0, -3.0
    else:
        raise ValueError(f"unsupported activation {kind!r}")
    V, n, nv = coeffs.shape
    rel = np.where(on, GE, LE).astype(np.int8).reshape(-1)
    rhs = (np.where(on, on_thr, off_thr) - const).reshape(-1) + 0.0
    formula = LinearFormula.from_rows(coeffs.reshape(V * n, nv), rel, rhs)
    coeffs = np.where(on[:, :, None], coeffs, 0.0)
    const = np.where(on, const, 0.0)
    return coeffs, const, formula, on


def _cond_single(kind, x: SymbolicPoint, ref, eps_strict=0.0):
    ref = np.asarray(ref, dtype=np.float64)
    if ref.shape != (len(x),):
        raise ValueError(f"reference has shape {ref.shape}, expected ({len(x)},)")
    c, k, f, _ = _conditional(kind, x.coeffs[None], x.const[None], ref[None], eps_strict)
    return SymbolicPoint(c[0], k[0]), f


def cond_relu(x: SymbolicPoint, ref, eps_strict: float = 0.0):
    return _cond_single(ActivationKind.RELU, x, ref, eps_strict)


def cond_hardswish(x: SymbolicPoint, ref):
    return _cond_single(ActivationKind.HARDSWISH, x, ref)


def cond_identity(x: SymbolicPoint, ref):
    return _cond_single(ActivationKind.IDENTITY, x, ref)


# --------------------------------------------------------------------------- symbolic slices


@dataclass
class SymbolicSlice:
    """A slice whose first-layer weights and every bias are variables.

    ``offset`` is the index of the slice's first layer in the full network, so
    recorded addresses refer to the full network.
    """

    net: Network
    registry: VarRegistry
    offset: int
    weight_vars: np.ndarray
    bias_vars: list[np.ndarray]

    @property
    def frozen_weights(self) -> list[np.ndarray]:
        return [layer.weights for layer in self.net.layers[1:]]

    @property
    def weight_exprs(self) -> list[list[AffineExpr]]:
        return [[AffineExpr.var(int(v)) for v in row] for row in self.weight_vars]

    @property
    def bias_exprs(self) -> list[list[AffineExpr]]:
        return [[AffineExpr.var(int(v)) for v in b] for b in self.bias_vars]

    @property
    def param_vars(self) -> np.ndarray:
        return np.concatenate([self.weight_vars.reshape(-1)] + self.bias_vars)

    def n_params(self) -> int:
        return self.weight_vars.size + sum(b.size for b in self.bias_vars)

    def update(self, values) -> Network:
        """Write variable values back into a copy of the slice."""
        values = np.asarray(values, dtype=np.float64)
        layers = list(self.net.layers)
        w0 = values[self.weight_vars]
        out = []
        for li, layer in enumerate(layers):
            w = w0 if li == 0 else layer.weights
            out.append(type(layer)(w, values[self.bias_vars[li]], layer.activation))
        return Network(tuple(out))


def make_symbolic_slice(slice_net: Network, registry: VarRegistry, offset: int = 0) -> SymbolicSlice:
    first = slice_net.layers[0]
    wv = np.empty(first.weights.shape, dtype=np.int64)
    for r in range(first.n_in):
        for c in range(first.n_out):
            wv[r, c] = registry.new_param(ParamAddress.weight(offset, r, c), first.weights[r, c])
    bv = []
    for li, layer in enumerate(slice_net.layers):
        bv.append(np.array(
            [registry.new_param(ParamAddress.bias(offset + li, c), layer.bias[c])
             for c in range(layer.n_out)],
            dtype=np.int64,
        ))
    return SymbolicSlice(slice_net, registry, offset, wv, bv)


@dataclass
class CondForward:
    outputs: SymbolicBatch
    formula: LinearFormula
    patterns: list[np.ndarray]      # per layer, (V, n) bool on-mask
    activation_rows: int


def cond_forward_batch(sym: SymbolicSlice, xs, refs, eps_strict: float = 0.0) -> CondForward:
    """Conditional symbolic execution of many points, each with its own reference.

    Layer 0 multiplies the concrete input by symbolic weights; later layers
    multiply symbolic values by concrete weights.  References are pushed
    through the slice's original parameters to pick each activation piece.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    refs = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    net = sym.net
    if xs.shape != refs.shape:
        raise ValueError("points and references must have the same shape")
    if xs.shape[1] != net.input_dim:
        raise ValueError(f"points have dimension {xs.shape[1]}, slice expects {net.input_dim}")
    V = xs.shape[0]
    nv = len(sym.registry)
    first = net.layers[0]
    n1 = first.n_out

    coeffs = np.zeros((V, n1, nv))
    cols = np.arange(n1)
    for r in range(first.n_in):
        coeffs[:, cols, sym.weight_vars[r]] = xs[:, r:r + 1]
    coeffs[:, cols, sym.bias_vars[0]] = 1.0
    const = np.zeros((V, n1))

    formulas = []
    patterns = []
    act_rows = 0
    ref = refs
    for li, layer in enumerate(net.layers):
        if li > 0:
            coeffs = np.matmul(coeffs.transpose(0, 2, 1), layer.weights).transpose(0, 2, 1)
            const = const @ layer.weights
            coeffs[:, np.arange(layer.n_out), sym.bias_vars[li]] += 1.0
        ref_pre = layer.pre_activation(ref)
        coeffs, const, f, on = _conditional(layer.activation, coeffs, const, ref_pre, eps_strict)
        formulas.append(f)
        patterns.append(on)
        act_rows += len(f)
        ref = apply_activation(layer.activation, ref_pre)
    return CondForward(SymbolicBatch(coeffs, const), LinearFormula.conjoin(formulas),
                       patterns, act_rows)


def _resize(E: sp.csr_matrix, n: int) -> sp.csr_matrix:
    return sp.csr_matrix((E.data, E.indices, E.indptr), shape=(E.shape[0], n))


def _piece_rows(kind: ActivationKind, E, c, ref_pre, eps_strict):
    """Sparse counterpart of ``_conditional`` on flattened ``(V*n)`` rows."""
    on = (ref_pre >= 0.0).reshape(-1)
    if kind is ActivationKind.IDENTITY:
        return E, c, None, np.ones_like(on)
    on_thr, off_thr = (0.0, -eps_strict) if kind is ActivationKind.RELU else (3.0, -3.0)
    rel = np.where(on, GE, LE).astype(np.int8)
    rhs = np.where(on, on_thr, off_thr) - c + 0.0
    rows = (E, rel, rhs)
    keep = sp.diags(on.astype(np.float64))
    return (keep @ E).tocsr(), np.where(on, c, 0.0), rows, on


@dataclass
class LiftedForward:
    """Sparse conditional forward pass with one auxiliary variable per live hidden value.

    ``outputs`` rows are ``(point, output)`` pairs in row-major order;
    ``activation`` holds the piece constraints and ``lifting`` the equalities
    that define the auxiliary variables.
    """

    outputs: sp.csr_matrix
    const: np.ndarray
    activation: LinearFormula
    lifting: LinearFormula
    patterns: list[np.ndarray]
    n_vars: int


def cond_forward_lifted(sym: SymbolicSlice, xs, refs, eps_strict: float = 0.0) -> LiftedForward:
    """Same pieces and constraints as ``cond_forward_batch``, encoded sparsely.

    The values leaving every hidden layer are named by new auxiliary
    variables, so each later row only mentions one layer's worth of terms.
    Projected onto the parameter variables, the feasible set is unchanged.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    refs = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    net = sym.net
    reg = sym.registry
    if xs.shape != refs.shape or xs.shape[1] != net.input_dim:
        raise ValueError("points and references must match the slice input width")
    V = xs.shape[0]
    first = net.layers[0]
    n_in, n1 = first.weights.shape

    rows = np.repeat(np.arange(V * n1), n_in + 1)
    wcols = np.concatenate([sym.weight_vars.T, sym.bias_vars[0][:, None]], axis=1)  # n1 x (n_in+1)
    cols = np.tile(wcols.reshape(-1), V)
    data = np.concatenate([xs[:, None, :].repeat(n1, axis=1), np.ones((V, n1, 1))], axis=2)
    E = sp.csr_matrix((data.reshape(-1), (rows, cols)), shape=(V * n1, len(reg)))
    c = np.zeros(V * n1)

    act_blocks, lift_blocks, patterns = [], [], []
    ref = refs
    for li, layer in enumerate(net.layers):
        n = layer.n_out
        if li > 0:
            # name the incoming live values, then push them through concrete weights
            prev = net.layers[li - 1].n_out
            live = np.nonzero(patterns[-1].reshape(-1))[0]
            z = reg.new_aux_block(f"h{sym.offset + li}", live.size)
            width = len(reg)
            Z = sp.csr_matrix((np.ones(live.size), (live, z)), shape=(V * prev, width))
            sel = _resize(E[live], width)
            lift_blocks.append((_resize(Z[live], width) - sel).tocsr())
            lift_rhs = c[live]
            lift_blocks[-1] = (lift_blocks[-1], np.full(live.size, EQ, dtype=np.int8), lift_rhs)
            M = sp.kron(sp.identity(V, format="csr"), sp.csr_matrix(layer.weights.T), format="csr")
            bias = sp.csr_matrix(
                (np.ones(V * n), (np.arange(V * n), np.tile(sym.bias_vars[li], V))),
                shape=(V * n, width))
            E = (M @ Z + bias).tocsr()
            c = np.zeros(V * n)
        ref_pre = layer.pre_activation(ref)
        E, c, piece, on = _piece_rows(layer.activation, E, c, ref_pre, eps_strict)
        if piece is not None:
            act_blocks.append(piece)
        patterns.append(on.reshape(V, n))
        ref = apply_activation(layer.activation, ref_pre)
    width = len(reg)
    act = LinearFormula([(_resize(A, width), r, b) for A, r, b in act_blocks])
    lift = LinearFormula([(_resize(A, width), r, b) for A, r, b in lift_blocks])
    return LiftedForward(_resize(E, width), c, act, lift, patterns, width)


def _as_symbolic(slice_or_sym, registry, offset=0) -> SymbolicSlice:
    if isinstance(slice_or_sym, SymbolicSlice):
        return slice_or_sym
    if registry is None:
        raise ValueError("a registry is needed to make a network symbolic")
    return make_symbolic_slice(slice_or_sym, registry, offset)


def cond_forward_point(slice_or_sym, x, ref, registry: VarRegistry | None = None,
                       eps_strict: float = 0.0):
    """Returns ``(SymbolicPoint, LinearFormula)`` for one concrete input."""
    sym = _as_symbolic(slice_or_sym, registry)
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.ndim != 1 or ref.shape != x.shape:
        raise ValueError("point and reference must be vectors of equal length")
    res = cond_forward_batch(sym, x[None], ref[None], eps_strict)
    return res.outputs[0], res.formula


REF_STRATEGIES = ("first-vertex", "centroid")


def calc_ref(vertices: np.ndarray, strategy: str = "first-vertex") -> np.ndarray:
    vertices = np.asarray(vertices, dtype=np.float64)
    if strategy == "first-vertex":
        return vertices[0].copy()
    if strategy == "centroid":
        return vertices.mean(axis=0)
    raise ValueError(f"unknown reference strategy {strategy!r}")


def cond_forward_polytope(slice_or_sym, p: VPolytope, ref_strategy: str = "first-vertex",
                          registry: VarRegistry | None = None, eps_strict: float = 0.0):
    """Every vertex shares one reference, so all land in the same pieces."""
    sym = _as_symbolic(slice_or_sym, registry)
    if len(p) == 0:
        raise ValueError("empty polytope")
    ref = calc_ref(p.vertices, ref_strategy)
    refs = np.broadcast_to(ref, p.vertices.shape)
    res = cond_forward_batch(sym, p.vertices, refs, eps_strict)
    return res.outputs, res.formula
