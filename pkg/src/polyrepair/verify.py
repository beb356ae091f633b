"""Independent checks: local linearity over a polytope and hull-wide spec certification."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .formulas import OutputFormula, RepairSpec
from .nn import ActivationKind, Network, VPolytope, apply_activation, forward_batch

# Pre-activations this close to a piece boundary count as on the boundary.
PIECE_TOL = 1e-7

# piece codes per neuron
OFF, ON, CONSTANT = 0, 1, 2

_BOUNDS = {
    ActivationKind.RELU: (0.0, 0.0),
    ActivationKind.HARDSWISH: (3.0, -3.0),
}


@dataclass
class MixedNeuron:
    layer: int
    neuron: int
    pre_activations: list[float]


@dataclass
class Linearity:
    """Outcome of a local-linearity decision; truthy when linear."""

    linear: bool
    pieces: list[np.ndarray]
    witness: MixedNeuron | None = None

    def __bool__(self) -> bool:
        return self.linear


def _pieces(kind: ActivationKind, pre: np.ndarray, tol: float):
    """Piece code per neuron from vertex pre-activations ``pre`` (V x n); -1 if mixed."""
    n = pre.shape[1]
    if kind is ActivationKind.IDENTITY:
        return np.full(n, ON)
    on_thr, off_thr = _BOUNDS[kind]
    lo, hi = pre.min(axis=0), pre.max(axis=0)
    codes = np.full(n, -1)
    codes[hi <= off_thr + tol] = OFF
    codes[lo >= on_thr - tol] = ON
    codes[hi - lo <= tol] = CONSTANT
    return codes


def is_locally_linear(net: Network, p: VPolytope, tol: float = PIECE_TOL) -> Linearity:
    """Decide whether ``net`` is one affine map on the hull of ``p``.

    Works layer by layer on vertex values: while the prefix is affine on the
    hull, every pre-activation is affine too, so its range over the hull is
    spanned by the vertex values.
    """
    if p.dim != net.input_dim:
        raise ValueError(f"polytope dimension {p.dim} but network input is {net.input_dim}")
    cur = p.vertices
    pieces = []
    for li, layer in enumerate(net.layers):
        pre = layer.pre_activation(cur)
        codes = _pieces(layer.activation, pre, tol)
        pieces.append(codes)
        mixed = np.nonzero(codes < 0)[0]
        if mixed.size:
            j = int(mixed[0])
            return Linearity(False, pieces, MixedNeuron(li, j, pre[:, j].tolist()))
        cur = apply_activation(layer.activation, pre)
    return Linearity(True, pieces)


class NotLocallyLinear(ValueError):
    pass


def local_linear_map(net: Network, p: VPolytope, tol: float = PIECE_TOL):
    """``(A, b)`` with ``net(x) = x @ A + b`` on the hull of ``p``."""
    lin = is_locally_linear(net, p, tol)
    if not lin:
        w = lin.witness
        raise NotLocallyLinear(f"neuron {w.neuron} of layer {w.layer} straddles a piece boundary")
    A = np.eye(net.input_dim)
    b = np.zeros(net.input_dim)
    cur = p.vertices
    for layer, codes in zip(net.layers, lin.pieces):
        A = A @ layer.weights
        b = b @ layer.weights + layer.bias
        pre = layer.pre_activation(cur)
        cur = apply_activation(layer.activation, pre)
        slope = (codes == ON).astype(np.float64)
        const = codes == CONSTANT
        A = A * slope
        b = np.where(const, cur.mean(axis=0), b * slope)
    return A, b


# --------------------------------------------------------------------------- certification


@dataclass
class ItemResult:
    index: int
    status: str                         # certified | sampled-only | failed
    vertices_ok: bool
    locally_linear: bool
    samples_ok: bool
    n_samples: int
    worst_slack: float
    mixed_neuron: dict | None = None
    witness_input: list[float] | None = None
    witness_output: list[float] | None = None
    violated_row: int | None = None

    @property
    def passed(self) -> bool:
        return self.status != "failed"


@dataclass
class VerifyReport:
    items: list[ItemResult] = field(default_factory=list)
    tol: float = 1e-6
    n_samples: int = 256
    seed: int = 0

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    @property
    def certified(self) -> bool:
        return all(it.status == "certified" for it in self.items)

    def counts(self) -> dict[str, int]:
        out = {"certified": 0, "sampled-only": 0, "failed": 0}
        for it in self.items:
            out[it.status] += 1
        return out

    def failures(self) -> list[ItemResult]:
        return [it for it in self.items if not it.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "certified": self.certified,
            "counts": self.counts(),
            "tol": self.tol,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "items": [asdict(it) for it in self.items],
        }


def _worst(psi: OutputFormula, ys: np.ndarray):
    """Smallest slack per point and which row attains it."""
    s = psi.slacks(ys)
    if s.shape[1] == 0:
        return np.full(ys.shape[0], np.inf), np.zeros(ys.shape[0], dtype=int)
    return s.min(axis=1), s.argmin(axis=1)


def refine_witness(net: Network, psi: OutputFormula, vertices: np.ndarray,
                   weights: np.ndarray, max_rounds: int = 400) -> np.ndarray:
    """Hill-climb convex weights toward a larger violation of ``psi``.

    Moves the weights toward one vertex at a time with a shrinking step; the
    result stays inside the hull.
    """
    lam = weights.copy()
    best = _worst(psi, forward_batch(net, (lam @ vertices)[None]))[0][0]
    step = 0.5
    V = vertices.shape[0]
    rounds = 0
    eye = np.eye(V)
    while step > 1e-9 and rounds < max_rounds:
        cands = (1.0 - step) * lam[None, :] + step * eye
        vals = _worst(psi, forward_batch(net, cands @ vertices))[0]
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = vals[i]
            lam = cands[i]
        else:
            step *= 0.5
        rounds += 1
    return lam


def _check_item(index, net, poly, psi, n_samples, tol, rng, piece_tol) -> ItemResult:
    verts = poly.vertices
    ys = forward_batch(net, verts)
    vmin, vrow = _worst(psi, ys)
    vertices_ok = bool(np.all(vmin >= -tol))
    lin = is_locally_linear(net, poly, piece_tol)
    mixed = asdict(lin.witness) if lin.witness is not None else None

    V = verts.shape[0]
    if V > 1 and n_samples > 0:
        lam = rng.dirichlet(np.ones(V), size=n_samples)
    else:
        lam = np.ones((max(n_samples, 0), V)) / V
    xs = lam @ verts
    smin, srow = _worst(psi, forward_batch(net, xs)) if n_samples else (np.zeros(0), np.zeros(0, int))
    samples_ok = bool(np.all(smin >= -tol))
    worst = float(min(vmin.min(initial=np.inf), smin.min(initial=np.inf)))

    res = ItemResult(index, "failed", vertices_ok, bool(lin), samples_ok, int(n_samples),
                     worst if np.isfinite(worst) else 0.0, mixed)
    if not vertices_ok or not samples_ok:
        if not vertices_ok and (smin.size == 0 or vmin.min() <= smin.min()):
            lam0 = np.eye(V)[int(np.argmin(vmin))]
        else:
            lam0 = lam[int(np.argmin(smin))]
        lam_w = refine_witness(net, psi, verts, lam0) if V > 1 else lam0
        x_w = lam_w @ verts
        y_w = forward_batch(net, x_w[None])[0]
        wmin, wrow = _worst(psi, y_w[None])
        res.witness_input = x_w.tolist()
        res.witness_output = y_w.tolist()
        res.violated_row = int(wrow[0])
        res.worst_slack = float(min(res.worst_slack, wmin[0]))
        return res
    res.status = "certified" if lin else "sampled-only"
    return res


def check_polytope(net: Network, spec: RepairSpec, n_samples: int = 256, tol: float = 1e-6,
                   seed: int = 0, piece_tol: float = PIECE_TOL) -> VerifyReport:
    """Check every item of ``spec`` on its whole convex hull.

    An item is certified when the formula holds at every vertex and the
    network is affine on the hull; otherwise random hull points are checked
    and the item is sampled-only or failed.
    """
    spec.check_against(net)
    rng = np.random.default_rng(seed)
    report = VerifyReport(tol=tol, n_samples=n_samples, seed=seed)
    for i, (poly, psi) in enumerate(spec.items):
        report.items.append(_check_item(i, net, poly, psi, n_samples, tol, rng, piece_tol))
    return report


def check_pointwise(net: Network, points: Sequence, psis: Sequence[OutputFormula],
                    tol: float = 1e-6) -> VerifyReport:
    return check_polytope(net, RepairSpec.pointwise(points, psis), n_samples=0, tol=tol)
