"""Functional information of circuit fidelity.

The pipeline turns a fidelity histogram into ``I(f) = -log2 P(f)``: a
regression tree estimates ``P`` from (bin mean fidelity, bin probability)
pairs, the estimate is floored so the logarithm stays finite, and a ridge
penalised spline smooths the resulting information curve.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .sampling import BinnedDistribution, Samples
from .spline import fit_spline_smooth
from .tree import RegressionTree, fit_tree


def bits(p: float) -> float:
    """Information in bits of an event with probability ``p``."""
    return -math.log2(p) if p != 1.0 else 0.0


@dataclass(frozen=True)
class QfiParams:
    max_depth: int = 8
    min_leaf: int = 2
    grid_points: int = 1001
    n_knots: int = 25
    ridge_lambda: float = 1e-3

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.n_knots < 0 or self.ridge_lambda < 0:
            raise ValueError("n_knots and ridge_lambda must be non-negative")


@dataclass
class QfiCurve:
    grid: np.ndarray
    p_hat: np.ndarray
    qfi_raw: np.ndarray
    qfi_smooth: np.ndarray
    p_floor: float
    params: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int | None:
        return self.params.get("n_qubits")

    @property
    def smooth_max(self) -> float:
        return float(self.qfi_smooth.max())

    def smooth_at(self, f):
        """Smoothed information at fidelity ``f`` (linear interpolation on the grid)."""
        return np.interp(f, self.grid, self.qfi_smooth)

    def raw_at(self, f):
        return np.interp(f, self.grid, self.qfi_raw)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "p_hat": self.p_hat.tolist(),
            "qfi_raw": self.qfi_raw.tolist(),
            "qfi_smooth": self.qfi_smooth.tolist(),
            "p_floor": self.p_floor,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QfiCurve":
        arrays = {k: np.asarray(data[k], dtype=float) for k in ("grid", "p_hat", "qfi_raw", "qfi_smooth")}
        n = len(arrays["grid"])
        if n < 2 or any(len(a) != n for a in arrays.values()):
            raise ValueError("curve arrays must share one length >= 2")
        return cls(**arrays, p_floor=float(data["p_floor"]), params=dict(data.get("params", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "QfiCurve":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fidelity", "p_hat", "qfi_raw", "qfi_smooth"])
        for row in zip(self.grid.tolist(), self.p_hat.tolist(), self.qfi_raw.tolist(), self.qfi_smooth.tolist()):
            w.writerow([repr(v) for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class QfiThresholdResult:
    threshold: float
    tail_probability: float
    information_bits: float


def qfi_point(tree: RegressionTree, f: float, p_floor: float) -> float:
    return bits(max(float(tree.predict(f)), p_floor))


def qfi_threshold(data, T: float, p_floor: float | None = None) -> QfiThresholdResult:
    """Information of reaching fidelity at least ``T``.

    ``data`` is either raw fidelities (array or :class:`Samples`) or a
    :class:`BinnedDistribution`; with bins the tail is counted at bin
    resolution, i.e. over bins whose lower edge is ``>= T``.
    """
    if not 0.0 <= T <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {T}")
    if isinstance(data, BinnedDistribution):
        total = data.total
        hits = int(data.count[data.lo >= T - 1e-12].sum()) if T > 0 else total
    else:
        f = data.fidelity if isinstance(data, Samples) else np.asarray(data, dtype=float)
        total = len(f)
        hits = int(np.count_nonzero(f >= T))
    if total == 0:
        raise ValueError("no records")
    floor = 1.0 / (total + 1) if p_floor is None else p_floor
    p = max(hits / total, floor)
    return QfiThresholdResult(T, p, bits(p))


def build_qfi_curve(bins: BinnedDistribution, params: QfiParams = QfiParams(),
                    n_qubits: int | None = None) -> QfiCurve:
    tree = fit_tree(bins, params.max_depth, params.min_leaf)
    grid = np.linspace(0.0, 1.0, params.grid_points)
    p_floor = 1.0 / (bins.total + 1)
    p_hat = np.maximum(tree.predict(grid), p_floor)
    qfi_raw = -np.log2(p_hat)
    qfi_smooth = fit_spline_smooth(grid, qfi_raw, params.n_knots, params.ridge_lambda)
    meta = asdict(params) | {"n_bins": bins.n_bins, "total": bins.total, "tree_r2": tree.r2}
    if n_qubits is not None:
        meta["n_qubits"] = n_qubits
    return QfiCurve(grid, p_hat, qfi_raw, qfi_smooth, p_floor, meta)
