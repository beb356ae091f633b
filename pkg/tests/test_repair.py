import numpy as np
import pytest

from conftest import random_net
from polyrepair import zoo
from polyrepair.demos import disjoint_boxes, random_network
from polyrepair.formulas import OutputFormula, RepairSpec
from polyrepair.lp import LPProblem
from polyrepair.nn import VPolytope, forward, param_diff, same_architecture
from polyrepair.repair import (
    RepairConfig,
    pointwise_repair,
    shift_and_assert,
    validate_partition,
    vpolytope_repair,
)
from polyrepair.verify import check_polytope, is_locally_linear


class TestValidatePartition:
    def test_singletons_need_nothing(self):
        pts = [VPolytope.point([x]) for x in (-1.0, 0.3, 2.0)]
        for k in (0, 1):
            assert validate_partition(zoo.dnn1(), [], k, pts) is None

    def test_overview_schedule(self):
        assert validate_partition(zoo.dnn1(), [(0, 1)], 1, [zoo.P1, zoo.P2]) is None

    def test_structural_violations(self):
        d1 = zoo.dnn1()
        assert "k_i < l_i" in validate_partition(d1, [(2, 1)], 1, [zoo.P1])
        assert "outside" in validate_partition(d1, [], 2, [zoo.P1])
        deep = random_network([2, 3, 3, 3, 1], 0)
        pt = [VPolytope.point([0.0, 0.0])]
        assert "k_1=2 exceeds l_0=1" in validate_partition(deep, [(0, 1), (2, 3)], 3, pt)
        assert "exceeds last" in validate_partition(deep, [(0, 1)], 3, pt)
        assert validate_partition(deep, [(0, 1), (1, 3)], 3, pt) is None

    def test_prefix_must_be_linear(self):
        msg = validate_partition(zoo.dnn1(), [], 1, [zoo.P2])
        assert msg is not None and "locally linear" in msg and "polytope 0" in msg
        assert validate_partition(zoo.dnn1(), [], 1, [zoo.P1]) is None


class TestShiftAndAssert:
    def test_second_layer_repair_of_dnn4(self):
        psi2 = [zoo.psi1(), zoo.psi2()]
        out, st = shift_and_assert(zoo.dnn4(), zoo.dnn4(), [zoo.P1, zoo.P2], psi2, 1)
        assert out is not None and st.status == "optimal"
        assert check_polytope(out, RepairSpec.of([zoo.P1, zoo.P2], psi2)).certified
        # the hand-picked second-layer repair is another feasible point
        assert check_polytope(zoo.dnn5(), RepairSpec.of([zoo.P1, zoo.P2], psi2)).certified
        np.testing.assert_allclose(forward(zoo.dnn5(), [1.5]), [0.1], atol=1e-12)
        np.testing.assert_allclose(forward(zoo.dnn5(), [3.0]), [0.4], atol=1e-12)
        assert not param_diff(out.slice(0, 1), zoo.dnn4().slice(0, 1))

    def test_top_spec_zero_objective(self):
        out, st = shift_and_assert(zoo.dnn4(), zoo.dnn4(), [zoo.P1, zoo.P2], None, 0)
        assert st.objective == pytest.approx(0.0, abs=1e-9) and st.n_spec_constraints == 0
        for x in ([-1.5], [-0.5], [1.5], [3.0]):
            np.testing.assert_allclose(forward(out, x), forward(zoo.dnn4(), x), atol=1e-7)

    def test_conflict_is_infeasible(self):
        p = VPolytope.point([1.0])
        psi = [OutputFormula.bounds(1, 0, lower=1.0), OutputFormula.bounds(1, 0, upper=0.0)]
        out, st = shift_and_assert(zoo.dnn1(), zoo.dnn1(), [p, p], psi, 0)
        assert out is None and st.status == "infeasible"

    def test_debug_precondition(self):
        with pytest.raises(AssertionError):
            shift_and_assert(zoo.dnn1(), zoo.dnn1(), [zoo.P2], [zoo.psi2()], 1,
                             RepairConfig(debug=True))

    def test_report_counts(self):
        _, st = shift_and_assert(zoo.dnn1(), zoo.dnn1(), [zoo.P1], [zoo.psi1()], 0,
                                 RepairConfig(compact_linf=False))
        assert st.n_activation_constraints == 6 and st.n_spec_constraints == 4
        # |delta| = 2 outputs + 7 params, 4 rows each
        assert st.n_delta_constraints == 4 * 9
        assert st.n_params == 7

    def test_no_polytopes(self):
        out, st = shift_and_assert(zoo.dnn1(), zoo.dnn1(), [], [], 0)
        assert st.objective == 0.0 and not param_diff(out, zoo.dnn1())


class TestVPolytopeRepair:
    def test_pointwise_overview(self):
        res = pointwise_repair(zoo.dnn1(), zoo.POINTS, [zoo.psi1(), zoo.psi1()], 0)
        assert res.ok and res.report.status == "success"
        for x in zoo.POINTS:
            assert -0.1 - 1e-6 <= forward(res.network, x)[0] <= 0.1 + 1e-6
        assert same_architecture(res.network, zoo.dnn1())

    def test_polytope_overview(self):
        res = vpolytope_repair(zoo.dnn1(), zoo.polytope_spec_two(), [(0, 1)], 1)
        assert res.ok, res.report.message
        assert res.report.verify["passed"]
        assert len(res.report.stages) == 2 and not res.report.stages[0].asserts_spec
        assert check_polytope(res.network, zoo.polytope_spec_two()).certified
        head = res.network.slice(0, 1)
        assert is_locally_linear(head, zoo.P1) and is_locally_linear(head, zoo.P2)

    def test_already_satisfied(self):
        spec = RepairSpec.of([zoo.P1], [OutputFormula.bounds(1, 0, -1.0, 1.0)])
        res = vpolytope_repair(zoo.dnn1(), spec, [], 0)
        assert res.ok and res.report.objective == pytest.approx(0.0, abs=1e-9)
        for x in (-1.5, -1.0, -0.5):
            np.testing.assert_allclose(forward(res.network, [x]), forward(zoo.dnn1(), [x]), atol=1e-7)

    def test_single_point_satisfied(self):
        res = pointwise_repair(zoo.dnn1(), [[4.0]], [OutputFormula.bounds(1, 0, 0.0, 1.0)], 0)
        assert res.ok and res.report.objective == pytest.approx(0.0, abs=1e-9)

    def test_empty_points(self):
        res = pointwise_repair(zoo.dnn1(), [], [], 0)
        assert res.ok and not param_diff(res.network, zoo.dnn1())

    def test_invalid_partition(self):
        res = vpolytope_repair(zoo.dnn1(), zoo.polytope_spec_two(), [], 1)
        assert not res.ok and res.report.status == "invalid_partition"

    def test_infeasible_reports_stage(self):
        p = VPolytope.point([1.0])
        spec = RepairSpec.of([p, p], [OutputFormula.bounds(1, 0, lower=1.0),
                                      OutputFormula.bounds(1, 0, upper=0.0)])
        res = vpolytope_repair(zoo.dnn1(), spec, [], 0)
        assert not res.ok and res.report.status == "infeasible" and res.report.failed_stage == 0

    def test_report_reproducibility_fields(self):
        res = vpolytope_repair(zoo.dnn1(), zoo.polytope_spec_two(), [(0, 1)], 1,
                               RepairConfig(ref_strategy="centroid", seed=9))
        d = res.report.to_dict()
        assert d["version"] and d["s"] == [[0, 1]] and d["k"] == 1
        cfg = d["config"]
        assert cfg["ref_strategy"] == "centroid" and cfg["seed"] == 9
        assert {"feas_tol", "opt_tol", "verify_tol", "piece_tol"} <= set(cfg)
        assert d["n_constraints"] == sum(s["n_constraints"] for s in d["stages"])
        assert all(set(e) == {"param", "old", "new"} for e in d["edits"])

    def test_never_returns_unverified(self, monkeypatch):
        from polyrepair import repair as repair_mod

        real = repair_mod.check_polytope

        def fake(*args, **kwargs):
            rep = real(*args, **kwargs)
            for it in rep.items:
                it.status = "sampled-only"
            return rep

        monkeypatch.setattr(repair_mod, "check_polytope", fake)
        res = vpolytope_repair(zoo.dnn1(), zoo.polytope_spec_two(), [(0, 1)], 1)
        assert not res.ok and res.report.status == "verification_failed"

    def test_spec_shape_errors(self):
        with pytest.raises(ValueError):
            vpolytope_repair(zoo.dnn1(), RepairSpec.of([VPolytope.point([1.0, 2.0])],
                                                       [zoo.psi1()]), [], 0)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            RepairConfig(ref_strategy="random")
        with pytest.raises(ValueError):
            RepairConfig(eps_strict=-1.0)


def _capture_lp(monkeypatch):
    from polyrepair import repair as repair_mod

    seen = []
    real = repair_mod.solve

    def spy(problem: LPProblem, *args, **kwargs):
        A, rel, rhs = problem.constraints.matrix(problem.n_vars)
        seen.append((A.toarray().tobytes(), rel.tobytes(), rhs.tobytes(),
                     problem.cost_vector().tobytes(), list(problem.names)))
        return real(problem, *args, **kwargs)

    monkeypatch.setattr(repair_mod, "solve", spy)
    return seen


def test_pointwise_and_singleton_polytopes_build_same_lp(monkeypatch):
    seen = _capture_lp(monkeypatch)
    psi = [zoo.psi1(), zoo.psi1()]
    pointwise_repair(zoo.dnn1(), zoo.POINTS, psi, 0)
    vpolytope_repair(zoo.dnn1(), RepairSpec.of([VPolytope([p]) for p in zoo.POINTS], psi), [], 0)
    assert len(seen) == 2 and seen[0] == seen[1]


def test_lp_is_deterministic(monkeypatch):
    seen = _capture_lp(monkeypatch)
    for _ in range(2):
        vpolytope_repair(zoo.dnn1(), zoo.polytope_spec_two(), [(0, 1)], 1)
    assert seen[:2] == seen[2:]


def _allowed(s, k, n_layers):
    weights, biases = set(), set()
    for ki, li in list(s) + [(k, n_layers)]:
        weights.add(ki)
        biases.update(range(ki, li))
    return weights, biases


@pytest.mark.parametrize("seed", range(6))
def test_edit_locality_and_architecture(seed):
    rng = np.random.default_rng(seed)
    net = random_network([3, 6, 6, 6, 2], seed)
    centers = disjoint_boxes(2, 3, 0.02, rng)
    polys = [VPolytope.box(c - 0.02, c + 0.02) for c in centers]
    labels = [int(np.argmax(forward(net, p.vertices[0]))) for p in polys]
    spec = RepairSpec.of(polys, [OutputFormula.classify(1 - y, "argmax") for y in labels])
    s = [(0, 1), (1, 2)]
    k = 2
    res = vpolytope_repair(net, spec, s, k)
    if not res.ok:
        assert res.report.status in ("infeasible", "numeric_failure", "verification_failed")
        return
    assert same_architecture(net, res.network)
    weights, biases = _allowed(s, k, len(net))
    for addr, _, _ in param_diff(net, res.network):
        assert (addr.layer in weights) if addr.kind == "weight" else (addr.layer in biases)
    assert check_polytope(res.network, spec).certified


def test_random_small_repairs(rng):
    done = 0
    for trial in range(15):
        net = random_net(rng, n_layers=3, acts=("relu",), n_in=2, n_out=2, max_width=5)
        pts = rng.normal(size=(3, 2))
        psi = [OutputFormula.classify(int(rng.integers(2)), "argmin") for _ in pts]
        res = pointwise_repair(net, pts, psi, int(rng.integers(0, 3)))
        if res.ok:
            done += 1
            assert same_architecture(net, res.network)
            for x, f in zip(pts, psi):
                assert f.holds(forward(res.network, x), 1e-6)
    assert done >= 5
