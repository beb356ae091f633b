import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_net
from polyrepair import zoo
from polyrepair.formulas import OutputFormula, RepairSpec
from polyrepair.io import (
    InputError,
    load_dataset,
    load_network,
    load_spec,
    save_dataset,
    save_network,
    save_spec,
    spec_from_dict,
    write_report,
)
from polyrepair.metrics import Dataset
from polyrepair.nn import VPolytope, param_diff, same_architecture


@given(st.integers(0, 2**32 - 1))
def test_network_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, acts=("relu", "hardswish", "identity"), scale=float(rng.uniform(1e-8, 1e8)))
    path = tmp_path_factory.mktemp("net") / "n.json"
    save_network(net, path)
    back = load_network(path)
    assert same_architecture(net, back) and not param_diff(net, back)
    for a, b in zip(net.layers, back.layers):
        assert a.weights.tobytes() == b.weights.tobytes() and a.bias.tobytes() == b.bias.tobytes()


def test_network_schema(tmp_path):
    save_network(zoo.dnn1(), tmp_path / "d1.json")
    d = json.loads((tmp_path / "d1.json").read_text())
    assert d["layers"][0] == {"weights": [[-1.0, 1.0, 0.5]], "bias": [0.0, -2.0, 0.0],
                              "activation": "relu"}


@pytest.mark.parametrize("text", [
    "not json",
    '{"layers": [{"weights": [[1.0]], "bias": [0.0, 1.0], "activation": "relu"}]}',
    '{"layers": [{"weights": [[NaN]], "bias": [0.0], "activation": "relu"}]}',
    '{"layers": [{"weights": [[1.0]], "bias": [0.0], "activation": "tanh"}]}',
    '{"nets": []}',
])
def test_bad_networks(tmp_path, text):
    (tmp_path / "bad.json").write_text(text)
    with pytest.raises(InputError):
        load_network(tmp_path / "bad.json")


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_network(tmp_path / "nope.json")


def test_spec_round_trip(tmp_path):
    spec = RepairSpec.of(
        [zoo.P1, VPolytope.box([0, 0], [1, 1]), zoo.P2],
        [zoo.psi1(), OutputFormula.classify(1, "argmin", 0.01), OutputFormula.top()],
    )
    save_spec(spec, tmp_path / "s.json")
    back = load_spec(tmp_path / "s.json")
    assert len(back) == 3
    for (p, f), (q, g) in zip(spec.items, back.items):
        np.testing.assert_array_equal(p.vertices, q.vertices)
        assert f.to_dict() == g.to_dict()


def test_spec_margin_default():
    spec = spec_from_dict({"items": [{"polytope": [[0.0]], "psi": {"classify": {"label": 0}}}]},
                          default_margin=0.5)
    assert spec.formulas[0].margin == 0.5 and spec.formulas[0].mode == "argmax"


@pytest.mark.parametrize("d", [
    {"items": [{"polytope": [], "psi": {"raw": []}}]},
    {"items": [{"polytope": [[0.0]], "psi": {"raw": [{"coeffs": [1.0], "rel": "<>", "rhs": 0}]}}]},
    {"items": [{"polytope": [[0.0]], "psi": {}}]},
    {"items": [{"polytope": [[0.0]], "psi": {"classify": {"label": 0, "mode": "top1"}}}]},
    {},
])
def test_bad_specs(d):
    with pytest.raises(InputError):
        spec_from_dict(d)


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ds = Dataset(rng.normal(size=(7, 3)), rng.integers(0, 4, 7), "argmin")
    save_dataset(ds, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "f0,f1,f2,label"
    back = load_dataset(tmp_path / "d.csv", "argmin")
    assert back.features.tobytes() == ds.features.tobytes()
    np.testing.assert_array_equal(back.labels, ds.labels)


@pytest.mark.parametrize("text", [
    "", "a,b,label\n1,2,0\n", "f0,label\n1,2,3\n", "f0,label\n1,0.5\n", "f0,label\nx,1\n",
    "f0,label\nnan,1\n",
])
def test_bad_datasets(tmp_path, text):
    (tmp_path / "d.csv").write_text(text)
    with pytest.raises(InputError):
        load_dataset(tmp_path / "d.csv")


def test_header_only_dataset(tmp_path):
    (tmp_path / "d.csv").write_text("f0,f1,label\n")
    ds = load_dataset(tmp_path / "d.csv")
    assert len(ds) == 0 and ds.features.shape == (0, 2)


def test_report_sanitizes(tmp_path):
    write_report({"a": float("inf"), "b": [1.0, float("nan")], "c": np.float64(2.5)},
                 tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == {"a": None, "b": [1.0, None], "c": 2.5}
