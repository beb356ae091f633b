"""Output formulas and repair specifications."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .nn import Network, VPolytope
from .symbolic import EQ, GE, LE, LinearFormula, Relation, SymbolicBatch, _slack

DEFAULT_MARGIN = 1e-4


@dataclass(frozen=True)
class OutputFormula:
    """A conjunction of linear constraints on the network output.

    ``raw`` rows read ``coeffs @ y  rel  rhs``.  ``classify`` asks the output at
    ``label`` to be the strict arg-extreme by at least ``margin``.  ``top`` is
    the always-true formula used by pure shift stages.
    """

    kind: str
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rel: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    label: int = -1
    mode: str = "argmax"
    margin: float = DEFAULT_MARGIN

    @classmethod
    def raw(cls, coeffs, rel, rhs) -> "OutputFormula":
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
        codes = [Relation.parse(r).code if not isinstance(r, (int, np.integer)) else int(r)
                 for r in np.atleast_1d(rel)]
        rel = np.array(codes, dtype=np.int8)
        rhs = np.atleast_1d(np.asarray(rhs, dtype=np.float64))
        if not (coeffs.shape[0] == rel.shape[0] == rhs.shape[0]):
            raise ValueError("raw formula rows disagree in count")
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(rhs))):
            raise ValueError("raw formula entries must be finite")
        return cls("raw", coeffs, rel, rhs)

    @classmethod
    def bounds(cls, m: int, index: int, lower: float | None = None,
               upper: float | None = None) -> "OutputFormula":
        """``lower <= y[index] <= upper`` on an ``m``-dimensional output."""
        rows, rels, rhs = [], [], []
        e = np.zeros(m)
        e[index] = 1.0
        if lower is not None:
            rows.append(e); rels.append(GE); rhs.append(lower)
        if upper is not None:
            rows.append(e); rels.append(LE); rhs.append(upper)
        return cls.raw(np.array(rows).reshape(len(rows), m), rels, rhs)

    @classmethod
    def classify(cls, label: int, mode: str = "argmax",
                 margin: float = DEFAULT_MARGIN) -> "OutputFormula":
        if mode not in ("argmax", "argmin"):
            raise ValueError(f"mode must be argmax or argmin, got {mode!r}")
        if label < 0:
            raise ValueError("label must be non-negative")
        if not (margin >= 0 and np.isfinite(margin)):
            raise ValueError("margin must be finite and non-negative")
        return cls("classify", label=int(label), mode=mode, margin=float(margin))

    @classmethod
    def top(cls) -> "OutputFormula":
        return cls("top")

    def desugar(self, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rows ``(C, rel, rhs)`` over an ``m``-dimensional output."""
        if self.kind == "top":
            return np.zeros((0, m)), np.zeros(0, dtype=np.int8), np.zeros(0)
        if self.kind == "raw":
            if self.coeffs.shape[1] != m:
                raise ValueError(
                    f"formula has {self.coeffs.shape[1]} output coefficients, network has {m}"
                )
            return self.coeffs, self.rel, self.rhs
        if self.label >= m:
            raise ValueError(f"label {self.label} out of range for {m} outputs")
        others = [j for j in range(m) if j != self.label]
        C = np.zeros((len(others), m))
        C[:, self.label] = 1.0
        C[np.arange(len(others)), others] = -1.0
        if self.mode == "argmax":
            return C, np.full(len(others), GE, dtype=np.int8), np.full(len(others), self.margin)
        return C, np.full(len(others), LE, dtype=np.int8), np.full(len(others), -self.margin)

    def n_rows(self, m: int) -> int:
        return self.desugar(m)[0].shape[0]

    def slacks(self, ys: np.ndarray) -> np.ndarray:
        """Per-point, per-row slack; shape ``(n, rows)``.  Non-negative means holds."""
        ys = np.atleast_2d(ys)
        C, rel, rhs = self.desugar(ys.shape[1])
        return _slack(ys @ C.T, rel[None, :], rhs[None, :])

    def holds(self, y, tol: float = 0.0) -> bool:
        s = self.slacks(np.asarray(y, dtype=np.float64)[None, :])
        return bool(np.all(s >= -tol))

    def on_symbolic(self, outs: SymbolicBatch) -> LinearFormula:
        """Apply the formula to every symbolic output point in ``outs``."""
        C, rel, rhs = self.desugar(outs.dim)
        if C.shape[0] == 0 or len(outs) == 0:
            return LinearFormula()
        V = len(outs)
        coeffs = np.einsum("rm,vmn->vrn", C, outs.coeffs).reshape(V * C.shape[0], outs.n_vars)
        const = (outs.const @ C.T).reshape(-1)
        return LinearFormula.from_rows(coeffs, np.tile(rel, V), np.tile(rhs, V) - const)

    def on_rows(self, E: sp.csr_matrix, const: np.ndarray, m: int) -> LinearFormula:
        """Like ``on_symbolic`` for sparse rows ordered ``(point, output)``."""
        C, rel, rhs = self.desugar(m)
        V = E.shape[0] // m if m else 0
        if C.shape[0] == 0 or V == 0:
            return LinearFormula()
        K = sp.kron(sp.identity(V, format="csr"), sp.csr_matrix(C), format="csr")
        return LinearFormula.from_rows(K @ E, np.tile(rel, V), np.tile(rhs, V) - K @ const)

    def to_dict(self) -> dict:
        if self.kind == "top":
            return {"top": True}
        if self.kind == "classify":
            return {"classify": {"label": self.label, "mode": self.mode, "margin": self.margin}}
        names = {LE: "<=", GE: ">=", EQ: "="}
        return {"raw": [
            {"coeffs": row.tolist(), "rel": names[int(r)], "rhs": float(b)}
            for row, r, b in zip(self.coeffs, self.rel, self.rhs)
        ]}


@dataclass(frozen=True)
class RepairSpec:
    items: tuple[tuple[VPolytope, OutputFormula], ...]

    def __post_init__(self):
        items = tuple((p if isinstance(p, VPolytope) else VPolytope(p), f) for p, f in self.items)
        object.__setattr__(self, "items", items)

    @classmethod
    def of(cls, polys: Sequence, psis: Sequence[OutputFormula]) -> "RepairSpec":
        if len(polys) != len(psis):
            raise ValueError("need exactly one formula per polytope")
        return cls(tuple(zip(polys, psis)))

    @classmethod
    def pointwise(cls, points, psis: Sequence[OutputFormula]) -> "RepairSpec":
        return cls.of([VPolytope.point(x) for x in points], psis)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def polytopes(self) -> list[VPolytope]:
        return [p for p, _ in self.items]

    @property
    def formulas(self) -> list[OutputFormula]:
        return [f for _, f in self.items]

    @property
    def n_vertices(self) -> int:
        return sum(len(p) for p, _ in self.items)

    def check_against(self, net: Network) -> None:
        """Raise ``ValueError`` if the spec does not fit the network's shape."""
        for i, (p, f) in enumerate(self.items):
            if p.dim != net.input_dim:
                raise ValueError(
                    f"item {i}: polytope dimension {p.dim} but network input is {net.input_dim}"
                )
            f.desugar(net.output_dim)
