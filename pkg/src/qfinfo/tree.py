"""One-dimensional CART regression tree (squared-error splits)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InsufficientData(ValueError):
    pass


@dataclass
class _Node:
    value: float
    n: int
    threshold: float | None = None
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.threshold is None


@dataclass
class RegressionTree:
    """Piecewise-constant fit; ``x <= threshold`` goes left."""

    root: _Node
    max_depth: int
    min_leaf: int
    r2: float = float("nan")
    thresholds: np.ndarray = field(init=False, repr=False)
    leaf_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cuts, values = [], []

        def walk(node):
            if node.is_leaf:
                values.append(node.value)
                return
            walk(node.left)
            cuts.append(node.threshold)
            walk(node.right)

        walk(self.root)
        self.thresholds = np.array(cuts, dtype=float)
        self.leaf_values = np.array(values, dtype=float)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_values)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        return self.leaf_values[np.searchsorted(self.thresholds, x, side="left")]


def _best_split(x, y, min_leaf):
    n = len(x)
    csum = np.cumsum(y)
    csq = np.cumsum(y * y)
    k = np.arange(min_leaf, n - min_leaf + 1)
    k = k[x[k - 1] < x[k]]
    if len(k) == 0:
        return None
    left_sse = csq[k - 1] - csum[k - 1] ** 2 / k
    right_sum = csum[-1] - csum[k - 1]
    right_sse = (csq[-1] - csq[k - 1]) - right_sum ** 2 / (n - k)
    total = left_sse + right_sse
    # prefix sums round differently per cut, so treat near-equal SSE as a tie
    # and take the first (smallest threshold)
    tol = 1e-12 * max(1.0, float(csq[-1]))
    j = int(np.flatnonzero(total <= total.min() + tol)[0])
    return int(k[j]), float(total[j])


def _grow(x, y, depth, max_depth, min_leaf):
    mean = float(y.mean())
    node = _Node(mean, len(y))
    sse = float(np.sum((y - mean) ** 2))
    if depth >= max_depth or sse <= 0.0 or len(y) < 2 * min_leaf:
        return node
    split = _best_split(x, y, min_leaf)
    if split is None or not split[1] < sse:
        return node
    k, _ = split
    node.threshold = 0.5 * (x[k - 1] + x[k])
    node.left = _grow(x[:k], y[:k], depth + 1, max_depth, min_leaf)
    node.right = _grow(x[k:], y[k:], depth + 1, max_depth, min_leaf)
    return node


def fit_xy(x, y, max_depth: int = 8, min_leaf: int = 2) -> RegressionTree:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 2:
        raise InsufficientData(f"need at least 2 training points, got {len(x)}")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    tree = RegressionTree(_grow(xs, ys, 0, max_depth, min_leaf), max_depth, min_leaf)
    sst = float(np.sum((ys - ys.mean()) ** 2))
    sse = float(np.sum((ys - tree.predict(xs)) ** 2))
    tree.r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return tree


def fit_tree(bins, max_depth: int = 8, min_leaf: int = 2) -> RegressionTree:
    """Fit bin probability against bin mean fidelity over the non-empty bins."""
    mask = bins.count > 0
    if int(mask.sum()) < 2:
        raise InsufficientData(f"need at least 2 non-empty bins, got {int(mask.sum())}")
    return fit_xy(bins.mean_fidelity[mask], bins.probability[mask], max_depth, min_leaf)
