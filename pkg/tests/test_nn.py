import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import random_net
from polyrepair import zoo
from polyrepair.nn import (
    ActivationKind,
    Layer,
    Network,
    ParamAddress,
    VPolytope,
    activate,
    forward,
    forward_batch,
    forward_polytope,
    forward_trace,
    param_diff,
    same_architecture,
    slice_network,
)

RELU, HSW, ID = ActivationKind.RELU, ActivationKind.HARDSWISH, ActivationKind.IDENTITY


class TestActivations:
    def test_relu_examples(self):
        assert activate(RELU, -4.0) == 0.0
        assert activate(RELU, 2.0) == 2.0

    def test_hardswish_examples(self):
        assert activate(HSW, 0.0) == 0.0
        assert activate(HSW, 1.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert activate(HSW, -3.0) == 0.0
        assert activate(HSW, 3.0) == 3.0

    def test_identity(self):
        assert activate(ID, -7.5) == -7.5

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            ActivationKind.parse("gelu")

    @given(st.floats(-1e6, 1e6))
    def test_bounds(self, x):
        assert activate(RELU, x) >= 0.0
        h = activate(HSW, x)
        assert h >= -0.375 - 1e-12
        if x >= 3:
            assert h == x
        if x <= -3:
            assert h == 0.0
        assert h == pytest.approx(oracles.act("hardswish", x), rel=1e-12, abs=1e-12)


class TestNetwork:
    def test_dnn1_outputs(self):
        d1 = zoo.dnn1()
        assert forward(d1, [4.0])[0] == pytest.approx(0.5, abs=1e-15)
        assert forward(d1, [-1.5])[0] == pytest.approx(0.25, abs=1e-15)
        assert forward(d1, [-0.5])[0] == pytest.approx(-0.25, abs=1e-15)

    def test_trace_examples(self):
        tr = forward_trace(zoo.dnn1(), [-1.5])
        np.testing.assert_allclose(tr[0][0], [1.5, -3.5, -0.75])
        np.testing.assert_allclose(tr[0][1], [1.5, 0.0, 0.0])
        tr = forward_trace(zoo.dnn1(), [4.0])
        np.testing.assert_allclose(tr[0][0], [-4.0, 2.0, 2.0])
        np.testing.assert_allclose(tr[0][1], [0.0, 2.0, 2.0])

    def test_trace_single_identity_layer(self):
        net = Network.from_arrays([[[2.0, -1.0]]], [[0.5, 0.25]], ["identity"])
        (pre, post), = forward_trace(net, [3.0])
        np.testing.assert_array_equal(pre, post)
        np.testing.assert_allclose(pre, [6.5, -2.75])

    def test_zero_weights_push_bias(self):
        net = Network.from_arrays([np.zeros((2, 3)), np.zeros((3, 1))],
                                  [[-1.0, 2.0, 0.5], [0.25]], ["relu", "identity"])
        assert forward(net, [9.0, -9.0])[0] == 0.25
        net2 = Network.from_arrays([np.zeros((2, 2))], [[-1.0, 2.0]], ["relu"])
        np.testing.assert_array_equal(forward(net2, [1.0, 1.0]), [0.0, 2.0])

    def test_slices_compose(self):
        d1 = zoo.dnn1()
        head, tail = d1.slice(0, 1), d1.slice(1, 2)
        assert forward(tail, forward(head, [4.0]))[0] == pytest.approx(0.5)
        assert forward(tail, [0.0, 2.0, 2.0])[0] == pytest.approx(0.5)
        whole = d1.slice(0, 2)
        assert same_architecture(whole, d1)
        assert not param_diff(whole, d1)

    @pytest.mark.parametrize("l0,l1", [(1, 1), (-1, 1), (0, 3), (2, 1)])
    def test_bad_slices(self, l0, l1):
        with pytest.raises(IndexError):
            slice_network(zoo.dnn1(), l0, l1)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(zoo.dnn1(), [1.0, 2.0])

    def test_layer_validation(self):
        with pytest.raises(ValueError):
            Layer(np.zeros((2, 3)), np.zeros(2), "relu")
        with pytest.raises(ValueError):
            Layer(np.array([[np.nan]]), np.zeros(1), "relu")
        with pytest.raises(ValueError):
            Network((Layer(np.zeros((1, 2)), np.zeros(2)), Layer(np.zeros((3, 1)), np.zeros(1))))
        with pytest.raises(ValueError):
            Network(())

    def test_with_params_and_diff(self):
        d1 = zoo.dnn1()
        a = ParamAddress.weight(0, 0, 0)
        b = ParamAddress.bias(1, 0)
        d2 = d1.with_params({a: -0.4, b: -0.2})
        assert d2.get(a) == -0.4 and d2.get(b) == -0.2
        assert d1.get(a) == -1.0
        diff = param_diff(d1, d2)
        assert [str(x[0]) for x in diff] == ["W[0][0,0]", "B[1][0]"]
        assert len(list(d1.addresses())) == d1.n_params() == 3 + 3 + 3 + 1

    def test_parameters_read_only(self):
        with pytest.raises(ValueError):
            zoo.dnn1().layers[0].weights[0, 0] = 5.0


class TestPolytopes:
    def test_forward_polytope_examples(self):
        head = zoo.dnn4().slice(0, 1)
        out = forward_polytope(head, zoo.P1)
        np.testing.assert_allclose(out.vertices, [[1.5, 0, 0], [0.5, 0, 0]], atol=1e-15)
        out = forward_polytope(head, zoo.P2)
        np.testing.assert_allclose(out.vertices, [[0, 0, 0.5], [0, 0, 1]], atol=1e-15)

    def test_singleton(self):
        p = VPolytope.point([1.0, 2.0])
        assert p.is_singleton() and len(p) == 1
        d = VPolytope([[1.0, 2.0], [1.0, 2.0]])
        assert d.is_singleton() and len(d) == 2

    def test_box_corners(self):
        b = VPolytope.box([0, 0, 0], [1, 2, 3])
        assert len(b) == 8
        assert {tuple(v) for v in b.vertices} == {
            (x, y, z) for x in (0, 1) for y in (0, 2) for z in (0, 3)}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            VPolytope(np.zeros((0, 2)))


@given(st.integers(0, 2**32 - 1))
def test_composition_and_oracle(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, acts=("relu", "hardswish", "identity"), max_width=6)
    x = rng.normal(0, 2, size=net.input_dim)
    y = forward(net, x)
    np.testing.assert_allclose(y, oracles.forward(net, x), rtol=1e-9, atol=1e-9)
    for k in range(1, len(net)):
        y2 = forward(net.slice(k, len(net)), forward(net.slice(0, k), x))
        np.testing.assert_array_equal(y, y2)
    assert np.array_equal(forward_trace(net, x)[-1][1], y)
    assert np.array_equal(forward(net, x), y)
    xs = rng.normal(size=(5, net.input_dim))
    np.testing.assert_allclose(forward_batch(net, xs)[2], forward(net, xs[2]), rtol=1e-12, atol=1e-12)
