"""JSON network/spec files, CSV datasets and report output.

Floats go through ``json``'s shortest round-trip ``repr``, so a saved network
reloads bit-exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .formulas import DEFAULT_MARGIN, OutputFormula, RepairSpec
from .metrics import Dataset
from .nn import Layer, Network, VPolytope


class InputError(ValueError):
    """A file is unreadable or does not describe a valid object."""


def _read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh, parse_constant=_reject_constant)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _reject_constant(name):
    raise InputError(f"non-finite number {name} is not allowed")


def write_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False, default=_default)
        fh.write("\n")


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _sanitize(obj):
    """Replace non-finite floats so reports stay valid JSON."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


# --------------------------------------------------------------------------- networks


def network_to_dict(net: Network) -> dict:
    return {"layers": [
        {"weights": layer.weights.tolist(), "bias": layer.bias.tolist(),
         "activation": layer.activation.value}
        for layer in net.layers
    ]}


def network_from_dict(d) -> Network:
    try:
        layers = d["layers"]
        return Network(tuple(
            Layer(np.array(l["weights"], dtype=np.float64),
                  np.array(l["bias"], dtype=np.float64), l["activation"])
            for l in layers
        ))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad network description: {exc}") from exc


def save_network(net: Network, path) -> None:
    write_json(network_to_dict(net), path)


def load_network(path) -> Network:
    return network_from_dict(_read_json(path))


# --------------------------------------------------------------------------- specs


def formula_from_dict(d, default_margin: float = DEFAULT_MARGIN) -> OutputFormula:
    if "raw" in d:
        rows = d["raw"]
        if not rows:
            return OutputFormula.top()
        return OutputFormula.raw([r["coeffs"] for r in rows], [r["rel"] for r in rows],
                                 [r["rhs"] for r in rows])
    if "classify" in d:
        c = d["classify"]
        return OutputFormula.classify(int(c["label"]), c.get("mode", "argmax"),
                                      float(c.get("margin", default_margin)))
    if d.get("top"):
        return OutputFormula.top()
    raise InputError("formula needs a 'raw' or 'classify' entry")


def spec_to_dict(spec: RepairSpec) -> dict:
    return {"items": [{"polytope": p.vertices.tolist(), "psi": f.to_dict()}
                      for p, f in spec.items]}


def spec_from_dict(d, default_margin: float = DEFAULT_MARGIN) -> RepairSpec:
    try:
        return RepairSpec(tuple(
            (VPolytope(np.array(item["polytope"], dtype=np.float64)),
             formula_from_dict(item["psi"], default_margin))
            for item in d["items"]
        ))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad spec description: {exc}") from exc


def save_spec(spec: RepairSpec, path) -> None:
    write_json(spec_to_dict(spec), path)


def load_spec(path, default_margin: float = DEFAULT_MARGIN) -> RepairSpec:
    return spec_from_dict(_read_json(path), default_margin)


# --------------------------------------------------------------------------- datasets


def save_dataset(ds: Dataset, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        d = ds.features.shape[1]
        w.writerow([f"f{i}" for i in range(d)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_dataset(path, mode: str = "argmax") -> Dataset:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: missing header")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 0 or header[-1] != "label" or header[:-1] != [f"f{i}" for i in range(d)]:
        raise InputError(f"{path}: header must be f0,...,f{{d-1}},label")
    feats, labels = [], []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise InputError(f"{path}:{n}: expected {d + 1} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row[:-1]]
            lab = float(row[-1])
        except ValueError as exc:
            raise InputError(f"{path}:{n}: {exc}") from exc
        if not lab.is_integer() or not all(np.isfinite(vals)):
            raise InputError(f"{path}:{n}: label must be integral and features finite")
        feats.append(vals)
        labels.append(int(lab))
    return Dataset(np.array(feats, dtype=np.float64).reshape(len(feats), d),
                   np.array(labels, dtype=np.int64), mode)


def write_report(report: dict, path) -> None:
    write_json(_sanitize(report), path)
