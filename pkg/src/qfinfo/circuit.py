"""Circuits over the 16-gate set and exact pure-state simulation.

Qubit ordering is little-endian: qubit 0 is the least significant bit of a
basis index, so ``|q_{n-1} ... q_1 q_0>`` has index ``sum(q_k << k)``.
Rotations follow ``R_a(theta) = exp(-i theta sigma_a / 2)`` and the phase
gate is ``diag(1, exp(i lambda))``.  Controlled gates take ``(control, target)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS_PURE = 8
MAX_QUBITS_DENSITY = 6
DEFAULT_MAX_GATES = 50

NORM_ATOL = 1e-9


class GateKind(enum.IntEnum):
    I = 0
    X = 1
    Y = 2
    Z = 3
    H = 4
    S = 5
    SDG = 6
    T = 7
    TDG = 8
    RX = 9
    RY = 10
    RZ = 11
    PHASE = 12
    CX = 13
    CZ = 14
    CY = 15

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def n_params(self) -> int:
        return 1 if GateKind.RX <= self <= GateKind.PHASE else 0

    @property
    def n_qubits(self) -> int:
        return 2 if self >= GateKind.CX else 1

    @classmethod
    def from_label(cls, label: str) -> "GateKind":
        try:
            return _BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown gate kind {label!r}") from None


_LABELS = {
    GateKind.I: "i", GateKind.X: "x", GateKind.Y: "y", GateKind.Z: "z",
    GateKind.H: "h", GateKind.S: "s", GateKind.SDG: "sdg", GateKind.T: "t",
    GateKind.TDG: "tdg", GateKind.RX: "rx", GateKind.RY: "ry", GateKind.RZ: "rz",
    GateKind.PHASE: "phase", GateKind.CX: "cx", GateKind.CZ: "cz", GateKind.CY: "cy",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}

N_KINDS = len(GateKind)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != self.kind.n_qubits:
            raise ValueError(f"{self.kind.label} acts on {self.kind.n_qubits} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind.label} needs distinct qubits, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")
        if len(self.params) != self.kind.n_params:
            raise ValueError(f"{self.kind.label} takes {self.kind.n_params} parameter(s), got {self.params}")

    @property
    def is_parameterized(self) -> bool:
        return self.kind.n_params == 1


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    max_gates: int = field(default=DEFAULT_MAX_GATES, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS_PURE:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS_PURE}], got {self.n_qubits}")
        if len(self.gates) > self.max_gates:
            raise ValueError(f"{len(self.gates)} gates exceed max_gates={self.max_gates}")
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g.kind.label}{g.qubits} out of range for {self.n_qubits} qubits")

    def __len__(self):
        return len(self.gates)

    def to_dict(self) -> dict:
        return {
            "n": self.n_qubits,
            "gates": [{"k": g.kind.label, "q": list(g.qubits), "p": list(g.params)} for g in self.gates],
        }

    @classmethod
    def from_dict(cls, data: dict, max_gates: int | None = None) -> "Circuit":
        gates = [Gate(GateKind.from_label(g["k"]), g["q"], g.get("p", ())) for g in data["gates"]]
        limit = DEFAULT_MAX_GATES if max_gates is None else max_gates
        return cls(int(data["n"]), tuple(gates), max(limit, len(gates)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}")
        if abs(np.vdot(amps, amps).real - 1.0) > NORM_ATOL:
            raise ValueError("state vector is not normalized")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = 1 << self.n_qubits
        if m.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    def check(self, atol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless the matrix is a valid density matrix."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > atol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(m).min() < -atol:
            raise ValueError("density matrix has a negative eigenvalue")


@dataclass(frozen=True)
class TargetState:
    n_qubits: int
    amplitudes: np.ndarray


# -- gate matrices -----------------------------------------------------------

_SQ2 = 1.0 / math.sqrt(2.0)
_I2 = np.eye(2, dtype=complex)
_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _phase(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


_FIXED = {
    GateKind.I: _I2,
    GateKind.X: _PAULI_X,
    GateKind.Y: _PAULI_Y,
    GateKind.Z: _PAULI_Z,
    GateKind.H: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    GateKind.S: _phase(math.pi / 2),
    GateKind.SDG: _phase(-math.pi / 2),
    GateKind.T: _phase(math.pi / 4),
    GateKind.TDG: _phase(-math.pi / 4),
}
_CONTROLLED_TARGET = {GateKind.CX: _PAULI_X, GateKind.CZ: _PAULI_Z, GateKind.CY: _PAULI_Y}


def single_qubit_matrix(kind: GateKind, theta: float = 0.0) -> np.ndarray:
    if kind in _FIXED:
        return _FIXED[kind]
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == GateKind.RZ:
        return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)
    if kind == GateKind.PHASE:
        return _phase(theta)
    raise ValueError(f"{kind.label} is not a single-qubit gate")


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of ``g``.

    Two-qubit gates are returned in the local basis ``|control, target>``
    (control is the high bit), i.e. ``[[I, 0], [0, U]]``.
    """
    if g.kind.n_qubits == 1:
        return single_qubit_matrix(g.kind, *g.params)
    u = np.eye(4, dtype=complex)
    u[2:, 2:] = _CONTROLLED_TARGET[g.kind]
    return u


# -- simulation --------------------------------------------------------------

def _axis(n_qubits: int, qubit: int) -> int:
    # C-order reshape puts the most significant bit (qubit n-1) on axis 0
    return n_qubits - 1 - qubit


def apply_unitary(tensor: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``u`` (2^k x 2^k, first listed axis most significant) into ``axes``."""
    k = len(axes)
    u = u.reshape((2,) * (2 * k))
    out = np.tensordot(u, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_gate(state: StateVector, g: Gate) -> StateVector:
    n = state.n_qubits
    if max(g.qubits) >= n:
        raise ValueError(f"gate {g.kind.label}{g.qubits} out of range for {n} qubits")
    psi = state.amplitudes.reshape((2,) * n)
    psi = apply_unitary(psi, gate_matrix(g), [_axis(n, q) for q in g.qubits])
    return StateVector(n, psi.reshape(-1))


def simulate(c: Circuit) -> StateVector:
    n = c.n_qubits
    psi = StateVector.zero(n).amplitudes.reshape((2,) * n)
    for g in c.gates:
        psi = apply_unitary(psi, gate_matrix(g), [_axis(n, q) for q in g.qubits])
    return StateVector(n, psi.reshape(-1))


def target_state(n: int) -> TargetState:
    """Bell state for two qubits, GHZ_n beyond."""
    if n < 2:
        raise ValueError(f"target state needs n >= 2, got {n}")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = _SQ2
    return TargetState(n, amps)


def fidelity_pure(state: StateVector, tau: TargetState) -> float:
    if state.n_qubits != tau.n_qubits:
        raise ValueError(f"dimension mismatch: {state.n_qubits} vs {tau.n_qubits} qubits")
    f = abs(np.vdot(tau.amplitudes, state.amplitudes)) ** 2
    return min(1.0, max(0.0, float(f)))


def fidelity_mixed(rho: DensityMatrix, tau: TargetState) -> float:
    if rho.n_qubits != tau.n_qubits:
        raise ValueError(f"dimension mismatch: {rho.n_qubits} vs {tau.n_qubits} qubits")
    v = tau.amplitudes
    f = np.vdot(v, rho.matrix @ v)
    if abs(f.imag) > 1e-9:
        raise ValueError(f"<tau|rho|tau> has imaginary part {f.imag:g}; rho is not Hermitian")
    return min(1.0, max(0.0, float(f.real)))


def reduced_qubit(state: StateVector | DensityMatrix, i: int) -> DensityMatrix:
    """Single-qubit reduced density matrix of qubit ``i``."""
    n = state.n_qubits
    if not 0 <= i < n:
        raise ValueError(f"qubit {i} out of range for {n} qubits")
    a = _axis(n, i)
    if isinstance(state, StateVector):
        psi = np.moveaxis(state.amplitudes.reshape((2,) * n), a, 0).reshape(2, -1)
        return DensityMatrix(1, psi @ psi.conj().T)
    t = state.matrix.reshape((2,) * (2 * n))
    rest = [k for k in range(n) if k != a]
    dim_rest = 1 << (n - 1)
    t = t.transpose([a] + rest + [n + a] + [n + k for k in rest]).reshape(2, dim_rest, 2, dim_rest)
    return DensityMatrix(1, np.einsum("ajbj->ab", t))


def _xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits of a single-qubit density matrix (closed-form eigenvalues)."""
    m = rho.matrix
    a, d = float(m[0, 0].real), float(m[1, 1].real)
    b = complex(m[0, 1])
    tr = a + d
    disc = math.sqrt(max(0.0, (a - d) ** 2 + 4.0 * (b.real ** 2 + b.imag ** 2)))
    lam_hi = min(1.0, max(0.0, 0.5 * (tr + disc)))
    lam_lo = min(1.0, max(0.0, 0.5 * (tr - disc)))
    s = -(_xlog2x(lam_hi) + _xlog2x(lam_lo))
    return min(1.0, max(0.0, s))


def avg_entropy(state: StateVector | DensityMatrix) -> float:
    n = state.n_qubits
    return sum(von_neumann_entropy(reduced_qubit(state, i)) for i in range(n)) / n


def circuit_depth(c: Circuit) -> int:
    """Layer count under greedy left-alignment."""
    last = [-1] * c.n_qubits
    depth = 0
    for g in c.gates:
        layer = max(last[q] for q in g.qubits) + 1
        for q in g.qubits:
            last[q] = layer
        depth = max(depth, layer + 1)
    return depth
