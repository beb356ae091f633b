"""Accuracy, drawdown and generalization over labeled datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Network, forward_batch


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    mode: str = "argmax"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim == 1 and x.size == 0:
            x = x.reshape(0, 0)
        if x.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError("need exactly one label per row")
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integral")
        if self.mode not in ("argmax", "argmin"):
            raise ValueError(f"mode must be argmax or argmin, got {self.mode!r}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y.astype(np.int64))

    def __len__(self) -> int:
        return self.labels.shape[0]


def predict(net: Network, xs: np.ndarray, mode: str = "argmax") -> np.ndarray:
    """Arg-extreme output index per row; ties go to the lowest index."""
    ys = forward_batch(net, xs)
    return np.argmax(ys, axis=1) if mode == "argmax" else np.argmin(ys, axis=1)


def accuracy(net: Network, ds: Dataset) -> float:
    """Fraction of rows predicted correctly; an empty dataset scores 1.0."""
    if len(ds) == 0:
        return 1.0
    if ds.labels.max() >= net.output_dim or ds.labels.min() < 0:
        raise ValueError("label outside the network's output range")
    return float(np.mean(predict(net, ds.features, ds.mode) == ds.labels))


def drawdown(net: Network, repaired: Network, ds: Dataset) -> float:
    return accuracy(net, ds) - accuracy(repaired, ds)


def generalization(net: Network, repaired: Network, ds: Dataset) -> float:
    return accuracy(repaired, ds) - accuracy(net, ds)
