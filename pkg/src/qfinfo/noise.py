"""Gate-local depolarizing noise and the robustness metric."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .circuit import (
    MAX_QUBITS_DENSITY,
    Circuit,
    DensityMatrix,
    TargetState,
    _axis,
    apply_unitary,
    fidelity_mixed,
    fidelity_pure,
    gate_matrix,
    simulate,
)


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.001
    p2: float = 0.01
    epsilon: float = 1e-9

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        unknown = set(data) - {"p1", "p2", "epsilon"}
        if unknown:
            raise ValueError(f"unknown noise fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def _depolarize_tensor(t: np.ndarray, n: int, qubits, p: float) -> np.ndarray:
    # Averaging PρP over all 4^k Paulis on k qubits replaces them with I/2^k,
    # so the uniform non-identity twirl is a mix of ρ and that replacement.
    if p == 0.0:
        return t
    k = len(qubits)
    d = 1 << k
    w = p * d * d / (d * d - 1)
    axes = [_axis(n, q) for q in qubits]
    rest = [a for a in range(n) if a not in axes]
    order = rest + [n + a for a in rest] + axes + [n + a for a in axes]
    dim_rest = 1 << (n - k)
    moved = t.transpose(order).reshape(dim_rest, dim_rest, d, d)
    reduced = np.einsum("abjj->ab", moved)
    mixed = reduced[:, :, None, None] * (np.eye(d) / d)[None, None, :, :]
    mixed = mixed.reshape((2,) * (2 * n)).transpose(np.argsort(order))
    return (1.0 - w) * t + w * mixed


def depolarize(rho: DensityMatrix, qubits, p: float) -> DensityMatrix:
    """Uniform Pauli depolarizing channel of strength ``p`` on one or two qubits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    n = rho.n_qubits
    t = rho.matrix.reshape((2,) * (2 * n))
    out = _depolarize_tensor(t, n, tuple(qubits), p)
    dim = 1 << n
    return DensityMatrix(n, out.reshape(dim, dim))


def simulate_noisy(c: Circuit, nm: NoiseModel) -> DensityMatrix:
    n = c.n_qubits
    if n > MAX_QUBITS_DENSITY:
        raise ValueError(f"density-matrix simulation is capped at {MAX_QUBITS_DENSITY} qubits, got {n}")
    dim = 1 << n
    t = np.zeros((dim, dim), dtype=complex)
    t[0, 0] = 1.0
    t = t.reshape((2,) * (2 * n))
    for g in c.gates:
        u = gate_matrix(g)
        axes = [_axis(n, q) for q in g.qubits]
        t = apply_unitary(t, u, axes)
        t = apply_unitary(t, u.conj(), [n + a for a in axes])
        t = _depolarize_tensor(t, n, g.qubits, nm.p1 if len(g.qubits) == 1 else nm.p2)
    return DensityMatrix(n, t.reshape(dim, dim))


def robustness(c: Circuit, nm: NoiseModel, tau: TargetState, f_ideal: float | None = None) -> float:
    """Fraction of the ideal fidelity that survives the noise model, capped at 1.

    ``f_ideal`` may be passed when the caller already simulated the circuit.
    """
    if f_ideal is None:
        f_ideal = fidelity_pure(simulate(c), tau)
    f_noisy = fidelity_mixed(simulate_noisy(c, nm), tau)
    if f_ideal >= nm.epsilon:
        return min(1.0, f_noisy / f_ideal)
    return min(1.0, f_noisy)
