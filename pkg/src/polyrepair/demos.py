"""End-to-end scenarios: the worked overview examples and two desk-scale experiments."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import zoo
from .formulas import OutputFormula, RepairSpec
from .metrics import Dataset, accuracy, drawdown
from .nn import Network, VPolytope, forward, forward_batch, same_architecture
from .repair import RepairConfig, RepairResult, pointwise_repair, vpolytope_repair
from .verify import check_pointwise, check_polytope, is_locally_linear


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class DemoResult:
    name: str
    checks: list[Check] = field(default_factory=list)
    info: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def table(self) -> str:
        width = max((len(c.name) for c in self.checks), default=4)
        lines = [f"{self.name}  ({self.seconds:.2f} s)"]
        for c in self.checks:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}")
        return "\n".join(lines)


# --------------------------------------------------------------------------- overview


def overview_demo(config: RepairConfig | None = None) -> DemoResult:
    config = config or RepairConfig()
    out = DemoResult("overview")
    t0 = time.perf_counter()
    d1 = zoo.dnn1()

    y4, y15 = forward(d1, [4.0])[0], forward(d1, [-1.5])[0]
    out.add("forward values of the original network",
            abs(y4 - 0.5) < 1e-12 and abs(y15 - 0.25) < 1e-12, f"N(4)={y4:g}, N(-1.5)={y15:g}")

    psi = [zoo.psi1(), zoo.psi1()]
    res = pointwise_repair(d1, zoo.POINTS, psi, 0, config)
    ys = forward_batch(res.network, zoo.POINTS)[:, 0] if res.ok else np.array([np.nan] * 2)
    out.add("pointwise repair lands in [-0.1, 0.1]",
            res.ok and bool(np.all(np.abs(ys) <= 0.1 + 1e-6)),
            f"outputs {np.round(ys, 6).tolist()}")
    out.info["pointwise"] = res.report.to_dict()

    ok2 = check_pointwise(zoo.dnn2(), zoo.POINTS, psi).passed
    bad1 = not check_pointwise(d1, zoo.POINTS, psi).passed
    out.add("reference repaired network passes, original fails", ok2 and bad1)

    rep3 = check_polytope(zoo.dnn3(), zoo.polytope_spec_two(), seed=config.seed)
    item = rep3.items[1]
    wx = item.witness_input[0] if item.witness_input else float("nan")
    wy = item.witness_output[0] if item.witness_output else float("nan")
    out.add("vertex-only fix rejected on the hull",
            rep3.items[0].passed and not item.passed and abs(wy - 0.532) <= 1e-3,
            f"witness x={wx:.4f} y={wy:.4f}")

    lin = (bool(is_locally_linear(zoo.dnn4(), zoo.P1)) and bool(is_locally_linear(zoo.dnn4(), zoo.P2))
           and bool(is_locally_linear(d1, zoo.P1)) and not is_locally_linear(d1, zoo.P2))
    out.add("shifted network affine on both polytopes", lin)

    res2 = vpolytope_repair(d1, zoo.polytope_spec_two(), [(0, 1)], 1, config)
    d5_ok = check_polytope(zoo.dnn5(), zoo.polytope_spec_two()).certified
    out.add("polytope repair certified", res2.ok and d5_ok and same_architecture(d1, res2.network),
            f"objective {res2.report.objective}")
    out.info["polytope"] = res2.report.to_dict()
    out.seconds = time.perf_counter() - t0
    return out


# --------------------------------------------------------------------------- random networks


def random_network(widths, seed, hidden="relu", output="identity", scale=1.0) -> Network:
    """He-style Gaussian weights, small Gaussian biases."""
    rng = np.random.default_rng(seed)
    ws, bs, acts = [], [], []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        ws.append(rng.normal(0.0, scale * np.sqrt(2.0 / a), size=(a, b)))
        bs.append(rng.normal(0.0, 0.1, size=b))
        acts.append(output if i == len(widths) - 2 else hidden)
    return Network.from_arrays(ws, bs, acts)


def disjoint_boxes(n, dim, half_width, rng, low=-1.0, high=1.0, max_tries=100_000):
    """Centers of ``n`` axis-aligned boxes that pairwise do not overlap."""
    centers = []
    tries = 0
    while len(centers) < n:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not place disjoint boxes")
        c = rng.uniform(low + half_width, high - half_width, size=dim)
        if all(np.max(np.abs(c - o)) > 2 * half_width for o in centers):
            centers.append(c)
    return np.array(centers)


def _hull_samples(net, spec, n, rng):
    """Count formula violations over ``n`` Dirichlet hull samples per item."""
    bad = 0
    for poly, psi in spec.items:
        lam = rng.dirichlet(np.ones(len(poly)), size=n)
        ys = forward_batch(net, lam @ poly.vertices)
        bad += int(np.sum(~np.all(psi.slacks(ys) >= 0.0, axis=1)))
    return bad


# --------------------------------------------------------------------------- ACAS-style


@dataclass
class AcasSetup:
    net: Network
    spec: RepairSpec
    s: list
    k: int
    test: Dataset


def acas_setup(seed: int = 0, n_boxes: int = 24, half_width: float = 0.05,
               width: int = 16, depth: int = 7, margin: float = 1e-4) -> AcasSetup:
    """5 inputs, ``depth-1`` ReLU layers of ``width``, 5 outputs, argmin labels."""
    rng = np.random.default_rng(seed)
    net = random_network([5] + [width] * (depth - 1) + [5], seed)
    centers = disjoint_boxes(n_boxes, 5, half_width, rng)
    labels = np.argmin(forward_batch(net, centers), axis=1)
    polys = [VPolytope.box(c - half_width, c + half_width) for c in centers]
    psis = [OutputFormula.classify(int(l), "argmin", margin) for l in labels]
    test_x = rng.uniform(-1.0, 1.0, size=(2000, 5))
    test = Dataset(test_x, np.argmin(forward_batch(net, test_x), axis=1), "argmin")
    s = [(i, i + 1) for i in range(depth - 1)]
    return AcasSetup(net, RepairSpec.of(polys, psis), s, depth - 1, test)


def acas_desk(seed: int = 0, n_samples: int = 10_000, config: RepairConfig | None = None,
              **setup_kw) -> tuple[DemoResult, RepairResult]:
    config = config or RepairConfig(seed=seed)
    t0 = time.perf_counter()
    st = acas_setup(seed, **setup_kw)
    out = DemoResult("acas-desk")
    before = check_polytope(st.net, st.spec, 256, config.verify_tol, seed)
    out.info["boxes_failing_before"] = before.counts()["failed"]
    res = vpolytope_repair(st.net, st.spec, st.s, st.k, config)
    out.info["report"] = res.report.to_dict()
    out.add("repair returned a network", res.ok, res.report.status)
    if res.ok:
        ver = check_polytope(res.network, st.spec, 256, config.verify_tol, seed + 1)
        out.add("every box certified", ver.certified, str(ver.counts()))
        bad = _hull_samples(res.network, st.spec, n_samples, np.random.default_rng(seed + 2))
        out.add(f"{n_samples} hull samples per box", bad == 0, f"{bad} violations")
        out.add("architecture preserved", same_architecture(st.net, res.network))
        dd = drawdown(st.net, res.network, st.test)
        out.info["drawdown"] = dd
        out.add("drawdown on random inputs", True, f"{dd:.4f}")
    out.seconds = time.perf_counter() - t0
    return out, res


# --------------------------------------------------------------------------- d-pixel boxes


@dataclass
class RobustSetup:
    net: Network
    spec: RepairSpec
    s: list
    k: int
    test: Dataset


def robust_setup(d: int, seed: int = 0, n_boxes: int = 2, eps: float = 0.1,
                 widths=(16, 16, 16, 10), margin: float = 1e-4) -> RobustSetup:
    """Boxes that perturb ``d`` of 16 input coordinates by up to ``eps``."""
    rng = np.random.default_rng(seed)
    net = random_network(list(widths), seed)
    n_in = widths[0]
    polys, psis = [], []
    for _ in range(n_boxes):
        x = rng.uniform(0.0, 1.0, size=n_in)
        idx = rng.choice(n_in, size=d, replace=False)
        lo, hi = x.copy(), x.copy()
        lo[idx] -= eps
        hi[idx] += eps
        corners = VPolytope.box(lo[idx], hi[idx]).vertices
        verts = np.repeat(x[None, :], corners.shape[0], axis=0)
        verts[:, idx] = corners
        polys.append(VPolytope(verts))
        psis.append(OutputFormula.classify(int(np.argmax(forward(net, x))), "argmax", margin))
    test_x = rng.uniform(0.0, 1.0, size=(2000, n_in))
    test = Dataset(test_x, np.argmax(forward_batch(net, test_x), axis=1), "argmax")
    return RobustSetup(net, RepairSpec.of(polys, psis), [(0, 1)], 1, test)


def activation_neurons(net: Network, k: int) -> int:
    """Neurons in layers ``[k, L)`` whose activation is not the identity."""
    return sum(layer.n_out for layer in net.layers[k:] if layer.activation.value != "identity")


def robustbox_desk(ds=(5, 8, 10), seed: int = 0, config: RepairConfig | None = None,
                   **setup_kw) -> DemoResult:
    config = config or RepairConfig(seed=seed)
    t0 = time.perf_counter()
    out = DemoResult("robustbox-desk")
    for d in ds:
        st = robust_setup(d, seed, **setup_kw)
        res = vpolytope_repair(st.net, st.spec, st.s, st.k, config)
        out.info[f"d={d}"] = res.report.to_dict()
        if not res.ok:
            out.add(f"d={d} repaired and certified", False, res.report.status)
            continue
        final = res.report.stages[-1]
        V = st.spec.n_vertices
        rows = sum(f.n_rows(st.net.output_dim) for f in st.spec.formulas) // len(st.spec)
        expected = V * (activation_neurons(st.net, st.k) + rows)
        got = final.n_activation_constraints + final.n_spec_constraints
        out.add(f"d={d} repaired and certified", True,
                f"{V} vertices, drawdown {drawdown(st.net, res.network, st.test):.4f}")
        out.add(f"d={d} constraint count", abs(got - expected) <= 0.05 * expected,
                f"{got} vs {expected}")
    out.seconds = time.perf_counter() - t0
    return out


DEMOS = {
    "overview": lambda cfg: overview_demo(cfg),
    "acas-desk": lambda cfg: acas_desk(config=cfg)[0],
    "robustbox-desk": lambda cfg: robustbox_desk(config=cfg),
}
