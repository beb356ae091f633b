"""The small one-input networks and specs of the worked overview examples."""

from __future__ import annotations

from .formulas import OutputFormula, RepairSpec
from .nn import Network, VPolytope

RELU_ID = ("relu", "identity")
_LAST = ([[0.5], [-0.5], [1.0]], [-0.5])


def dnn1() -> Network:
    return Network.from_arrays([[[-1.0, 1.0, 0.5]], _LAST[0]], [[0.0, -2.0, 0.0], _LAST[1]], RELU_ID)


def dnn2() -> Network:
    """Pointwise repair of ``dnn1``."""
    return Network.from_arrays([[[-0.4, 1.0, 0.5]], _LAST[0]], [[0.0, -2.0, 0.0], [-0.2]], RELU_ID)


def dnn3() -> Network:
    """Fixes both polytopes at their vertices but not on the hull of P2."""
    return Network.from_arrays([[[-0.4, 1.0, 0.366]], _LAST[0]], [[0.0, -2.0, 0.0], [-0.2]], RELU_ID)


def dnn4() -> Network:
    """``dnn1`` shifted so it is affine on both P1 and P2."""
    return Network.from_arrays([[[-1.0, 0.75, 1.0 / 3.0]], _LAST[0]], [[0.0, -2.25, 0.0], _LAST[1]],
                               RELU_ID)


def dnn5() -> Network:
    """Second-layer repair of ``dnn4``."""
    first = dnn4().layers[0]
    return Network.from_arrays([first.weights, [[0.2], [-0.5], [0.6]]], [first.bias, [-0.2]], RELU_ID)


P1 = VPolytope([[-1.5], [-0.5]])
P2 = VPolytope([[1.5], [3.0]])
POINTS = [[-1.5], [-0.5]]


def psi1() -> OutputFormula:
    return OutputFormula.bounds(1, 0, -0.1, 0.1)


def psi2() -> OutputFormula:
    return OutputFormula.bounds(1, 0, 0.0, 0.4)


def pointwise_spec() -> RepairSpec:
    return RepairSpec.pointwise(POINTS, [psi1(), psi1()])


def polytope_spec_one() -> RepairSpec:
    return RepairSpec.of([P1], [psi1()])


def polytope_spec_two() -> RepairSpec:
    return RepairSpec.of([P1, P2], [psi1(), psi2()])
