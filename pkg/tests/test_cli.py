import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from polyrepair import zoo
from polyrepair.cli import main, parse_partition
from polyrepair.formulas import OutputFormula, RepairSpec
from polyrepair.io import InputError, load_network, save_dataset, save_network, save_spec
from polyrepair.metrics import Dataset
from polyrepair.nn import VPolytope
from polyrepair.verify import check_polytope


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, net in [("dnn1", zoo.dnn1()), ("dnn3", zoo.dnn3()), ("dnn5", zoo.dnn5())]:
        paths[name] = tmp_path / f"{name}.json"
        save_network(net, paths[name])
    for name, spec in [("pointwise", zoo.pointwise_spec()), ("two", zoo.polytope_spec_two()),
                       ("empty", RepairSpec(())),
                       ("conflict", RepairSpec.of(
                           [VPolytope.point([1.0])] * 2,
                           [OutputFormula.bounds(1, 0, lower=1.0),
                            OutputFormula.bounds(1, 0, upper=0.0)]))]:
        paths[name] = tmp_path / f"{name}.spec.json"
        save_spec(spec, paths[name])
    paths["dir"] = tmp_path
    return paths


def _repair(files, spec, partition, k, *extra):
    out = files["dir"] / "out.json"
    rep = files["dir"] / "report.json"
    code = main(["repair", "--network", str(files["dnn1"]), "--spec", str(files[spec]),
                 "--partition", partition, "--k", str(k), "--out", str(out),
                 "--report", str(rep), *extra])
    return code, out, json.loads(rep.read_text())


def test_parse_partition():
    assert parse_partition("") == [] and parse_partition(" 0:1, 1:2 ") == [(0, 1), (1, 2)]
    with pytest.raises(InputError):
        parse_partition("0-1")


def test_repair_pointwise(files, capsys):
    code, out, rep = _repair(files, "pointwise", "", 0)
    assert code == 0 and rep["status"] == "success"
    net = load_network(out)
    assert check_polytope(net, zoo.pointwise_spec()).passed
    assert "repaired" in capsys.readouterr().out
    assert main(["verify", "--network", str(out), "--spec", str(files["pointwise"])]) == 0


def test_repair_polytopes(files):
    code, out, rep = _repair(files, "two", "0:1", 1, "--ref-strategy", "centroid", "--seed", "4")
    assert code == 0
    assert rep["config"]["ref_strategy"] == "centroid" and rep["config"]["seed"] == 4
    assert rep["s"] == [[0, 1]] and rep["k"] == 1 and rep["version"]
    assert check_polytope(load_network(out), zoo.polytope_spec_two()).certified


def test_repair_infeasible(files):
    code, out, rep = _repair(files, "conflict", "", 0)
    assert code == 2 and rep["status"] == "infeasible" and not out.exists()


def test_repair_invalid_partition(files):
    code, _, rep = _repair(files, "two", "", 1)
    assert code == 1 and rep["status"] == "invalid_partition"


def test_repair_dump_lp(files):
    dump = files["dir"] / "lps"
    code, _, _ = _repair(files, "two", "0:1", 1, "--dump-lp", str(dump), "--backend", "simplex")
    assert code == 0 and sorted(p.name for p in dump.iterdir()) == ["stage0.lp", "stage1.lp"]


def test_verify(files, capsys):
    assert main(["verify", "--network", str(files["dnn5"]), "--spec", str(files["two"])]) == 0
    rep = files["dir"] / "v.json"
    code = main(["verify", "--network", str(files["dnn3"]), "--spec", str(files["two"]),
                 "--report", str(rep)])
    assert code == 3
    item = json.loads(rep.read_text())["items"][1]
    assert item["status"] == "failed"
    assert item["witness_input"][0] == pytest.approx(2.0, abs=1e-3)
    assert item["witness_output"][0] == pytest.approx(0.532, abs=1e-3)
    assert "witness" in capsys.readouterr().out
    assert main(["verify", "--network", str(files["dnn1"]), "--spec", str(files["empty"])]) == 0


def test_eval(files, capsys):
    rng = np.random.default_rng(0)
    xs = rng.uniform(-3, 3, size=(50, 1))
    path = files["dir"] / "d.csv"
    save_dataset(Dataset(xs, np.zeros(50)), path)
    assert main(["eval", "--network", str(files["dnn1"]), "--dataset", str(path)]) == 0
    assert "accuracy: 1.0" in capsys.readouterr().out
    rep = files["dir"] / "e.json"
    assert main(["eval", "--network", str(files["dnn5"]), "--baseline", str(files["dnn1"]),
                 "--dataset", str(path), "--mode", "argmin", "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert d["rows"] == 50 and d["drawdown"] == -d["generalization"]


@pytest.mark.parametrize("argv", [
    [], ["repair"], ["frobnicate"],
    ["verify", "--network", "/nonexistent.json", "--spec", "/nonexistent.json"],
    ["repair", "--network", "N", "--spec", "S", "--k", "x", "--out", "o"],
])
def test_usage_errors(argv):
    assert main(argv) == 1


def test_input_errors(files):
    bad = files["dir"] / "bad.json"
    bad.write_text("{")
    assert main(["verify", "--network", str(bad), "--spec", str(files["two"])]) == 1
    code = main(["repair", "--network", str(files["dnn1"]), "--spec", str(files["two"]),
                 "--partition", "0;1", "--k", "1", "--out", str(files["dir"] / "o.json")])
    assert code == 1
    wide = files["dir"] / "wide.spec.json"
    save_spec(RepairSpec.of([VPolytope.point([0.0, 1.0])], [zoo.psi1()]), wide)
    assert main(["verify", "--network", str(files["dnn1"]), "--spec", str(wide)]) == 1


def test_demo_overview(capsys):
    assert main(["demo", "overview"]) == 0
    assert capsys.readouterr().out.count("PASS") == 6


@pytest.mark.skipif(shutil.which("polyrepair") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["polyrepair", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_module_entry():
    res = subprocess.run([sys.executable, "-m", "polyrepair.cli", "demo", "overview"],
                         capture_output=True, text=True)
    assert res.returncode == 0
