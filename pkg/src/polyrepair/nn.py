"""Fully-connected networks with identity, ReLU and Hardswish activations.

Row-vector convention throughout: a layer maps ``x`` to ``act(x @ W + b)`` with
``W`` of shape ``(n_in, n_out)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np


class ActivationKind(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    HARDSWISH = "hardswish"

    @classmethod
    def parse(cls, tag: "str | ActivationKind") -> "ActivationKind":
        if isinstance(tag, ActivationKind):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown activation tag {tag!r}") from None


def apply_activation(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    """Vectorized activation; works on arrays of any shape."""
    x = np.asarray(x, dtype=np.float64)
    if kind is ActivationKind.IDENTITY:
        return x.copy()
    if kind is ActivationKind.RELU:
        return np.where(x >= 0.0, x, 0.0)
    if kind is ActivationKind.HARDSWISH:
        mid = x * (x + 3.0) / 6.0
        return np.where(x <= -3.0, 0.0, np.where(x >= 3.0, x, mid))
    raise ValueError(f"unknown activation {kind!r}")


def activate(kind: ActivationKind, x: float) -> float:
    return float(apply_activation(ActivationKind.parse(kind), np.float64(x)))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind = ActivationKind.IDENTITY

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(self.bias)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[1]:
            raise ValueError(
                f"bias length {b.shape} does not match weight columns {w.shape[1]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]

    def pre_activation(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_activation(self.activation, self.pre_activation(x))


@dataclass(frozen=True)
class ParamAddress:
    """Addresses one scalar parameter: ``kind`` is ``"weight"`` or ``"bias"``.

    Bias entries use ``row = 0``.
    """

    layer: int
    kind: str
    row: int
    col: int

    @classmethod
    def weight(cls, layer: int, row: int, col: int) -> "ParamAddress":
        return cls(layer, "weight", row, col)

    @classmethod
    def bias(cls, layer: int, col: int) -> "ParamAddress":
        return cls(layer, "bias", 0, col)

    def __str__(self) -> str:
        if self.kind == "weight":
            return f"W[{self.layer}][{self.row},{self.col}]"
        return f"B[{self.layer}][{self.col}]"


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].n_out != layers[i + 1].n_in:
                raise ValueError(
                    f"layer {i} outputs {layers[i].n_out} values but layer {i + 1} "
                    f"expects {layers[i + 1].n_in}"
                )
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_arrays(
        cls,
        weights: Sequence,
        biases: Sequence,
        activations: Sequence,
    ) -> "Network":
        return cls(
            tuple(Layer(w, b, a) for w, b, a in zip(weights, biases, activations, strict=True))
        )

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [layer.n_out for layer in self.layers]

    def slice(self, l0: int, l1: int) -> "Network":
        return slice_network(self, l0, l1)

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)

    def get(self, addr: ParamAddress) -> float:
        layer = self.layers[addr.layer]
        if addr.kind == "weight":
            return float(layer.weights[addr.row, addr.col])
        return float(layer.bias[addr.col])

    def with_params(self, updates: Mapping[ParamAddress, float]) -> "Network":
        """Return a copy with the addressed parameters replaced."""
        weights = [layer.weights.copy() for layer in self.layers]
        biases = [layer.bias.copy() for layer in self.layers]
        for addr, value in updates.items():
            if addr.kind == "weight":
                weights[addr.layer][addr.row, addr.col] = value
            elif addr.kind == "bias":
                biases[addr.layer][addr.col] = value
            else:
                raise ValueError(f"bad parameter kind {addr.kind!r}")
        return Network.from_arrays(weights, biases, [l.activation for l in self.layers])

    def addresses(self) -> Iterable[ParamAddress]:
        for li, layer in enumerate(self.layers):
            for r in range(layer.n_in):
                for c in range(layer.n_out):
                    yield ParamAddress.weight(li, r, c)
            for c in range(layer.n_out):
                yield ParamAddress.bias(li, c)

    def n_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)


def concat(*nets: Network) -> Network:
    return Network(tuple(layer for net in nets for layer in net.layers))


def same_architecture(a: Network, b: Network) -> bool:
    if len(a) != len(b):
        return False
    return all(
        la.weights.shape == lb.weights.shape
        and la.bias.shape == lb.bias.shape
        and la.activation is lb.activation
        for la, lb in zip(a.layers, b.layers)
    )


def param_diff(a: Network, b: Network, atol: float = 0.0) -> list[tuple[ParamAddress, float, float]]:
    """Parameters that differ between two networks of the same architecture."""
    if not same_architecture(a, b):
        raise ValueError("networks differ in architecture")
    out = []
    for li, (la, lb) in enumerate(zip(a.layers, b.layers)):
        for r, c in zip(*np.nonzero(np.abs(la.weights - lb.weights) > atol)):
            out.append((ParamAddress.weight(li, int(r), int(c)),
                        float(la.weights[r, c]), float(lb.weights[r, c])))
        for c in np.nonzero(np.abs(la.bias - lb.bias) > atol)[0]:
            out.append((ParamAddress.bias(li, int(c)), float(la.bias[c]), float(lb.bias[c])))
    return out


def _check_input(net: Network, x: np.ndarray) -> None:
    if x.shape[-1] != net.input_dim:
        raise ValueError(
            f"input has dimension {x.shape[-1]}, network expects {net.input_dim}"
        )


def forward_batch(net: Network, xs) -> np.ndarray:
    """Evaluate ``net`` on the rows of ``xs`` (shape ``(n, input_dim)``)."""
    out = np.array(xs, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError("forward_batch expects a 2-D array of points")
    _check_input(net, out)
    for layer in net.layers:
        out = layer(out)
    return out


def forward(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward expects a single point; use forward_batch")
    return forward_batch(net, x[None, :])[0]


def forward_trace(net: Network, x) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-layer ``(pre_activation, post_activation)`` pairs for one point."""
    cur = np.asarray(x, dtype=np.float64)
    if cur.ndim != 1:
        raise ValueError("forward_trace expects a single point")
    _check_input(net, cur)
    cur = cur[None, :]
    trace = []
    for layer in net.layers:
        pre = layer.pre_activation(cur)
        cur = apply_activation(layer.activation, pre)
        trace.append((pre[0], cur[0]))
    return trace


def slice_network(net: Network, l0: int, l1: int) -> Network:
    if not (0 <= l0 < l1 <= len(net)):
        raise IndexError(f"invalid slice [{l0}, {l1}) of a {len(net)}-layer network")
    return Network(net.layers[l0:l1])


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of a finite vertex list (duplicates allowed, order kept)."""

    vertices: np.ndarray = field()

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError("a V-polytope needs at least one vertex of positive dimension")
        if not np.all(np.isfinite(v)):
            raise ValueError("polytope vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def point(cls, x) -> "VPolytope":
        return cls(np.asarray(x, dtype=np.float64)[None, :])

    @classmethod
    def box(cls, lower, upper) -> "VPolytope":
        """All 2^d corners of an axis-aligned box, in binary-counting order."""
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        d = lower.shape[0]
        bits = (np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1
        return cls(np.where(bits == 1, upper, lower))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def is_singleton(self) -> bool:
        return bool(np.all(self.vertices == self.vertices[0]))


def forward_polytope(net: Network, p: VPolytope) -> VPolytope:
    return VPolytope(forward_batch(net, p.vertices))
