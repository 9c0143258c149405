"""Random-circuit ensembles, fidelity histograms and correlation statistics.

Circuit ``i`` of an ensemble is drawn from the stream ``derive(seed, i)``, and
the ensemble is processed in fixed-size chunks that are reduced in index
order.  Thread count therefore only changes wall time, never results.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np
from numba import njit

from . import rng
from .circuit import (
    MAX_QUBITS_PURE,
    N_KINDS,
    Circuit,
    Gate,
    GateKind,
    target_state,
)

log = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 15
PROGRESS_EVERY = 100_000
DEFAULT_BINS = 200

_TWO_PI = 2.0 * math.pi
_FIRST_PARAM = int(GateKind.RX)
_LAST_PARAM = int(GateKind.PHASE)
_FIRST_2Q = int(GateKind.CX)


class UndefinedStatistic(ValueError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


@dataclass(frozen=True)
class SamplerConfig:
    n_qubits: int
    max_gates: int = 50
    num_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.n_qubits <= MAX_QUBITS_PURE:
            raise ValueError(f"n_qubits must be in [2, {MAX_QUBITS_PURE}], got {self.n_qubits}")
        if self.max_gates < 1:
            raise ValueError(f"max_gates must be >= 1, got {self.max_gates}")
        if self.num_samples < 0:
            raise ValueError(f"num_samples must be >= 0, got {self.num_samples}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


class SampleRecord(NamedTuple):
    fidelity: float
    gate_count: int
    depth: int


# -- numba kernels -------------------------------------------------------------

@njit(cache=True, nogil=True)
def draw_gate(state, n):
    """One gate: uniform kind, uniform distinct qubits, angle uniform in [0, 2pi)."""
    kind = rng.randint(state, N_KINDS)
    if kind >= _FIRST_2Q:
        a = rng.randint(state, n)
        b = rng.randint(state, n - 1)
        if b >= a:
            b += 1
        return kind, a, b, 0.0
    q = rng.randint(state, n)
    theta = 0.0
    if _FIRST_PARAM <= kind <= _LAST_PARAM:
        theta = rng.uniform(state) * _TWO_PI
    return kind, q, np.int64(-1), theta


@njit(cache=True, nogil=True)
def draw_circuit(state, n, max_gates, kinds, q0, q1, theta):
    length = 1 + rng.randint(state, max_gates)
    for j in range(length):
        k, a, b, t = draw_gate(state, n)
        kinds[j] = k
        q0[j] = a
        q1[j] = b
        theta[j] = t
    return length


@njit(cache=True, nogil=True)
def _kernel_matrix(kind, theta):
    # returns (m00, m01, m10, m11); controlled kinds give their target unitary
    r = 0.7071067811865476
    one = 1.0 + 0.0j
    zero = 0.0 + 0.0j
    if kind == 0:
        return one, zero, zero, one
    if kind == 1 or kind == 13:
        return zero, one, one, zero
    if kind == 2 or kind == 15:
        return zero, -1j, 1j, zero
    if kind == 3 or kind == 14:
        return one, zero, zero, -one
    if kind == 4:
        return r * one, r * one, r * one, -r * one
    if kind == 5:
        return one, zero, zero, 1j
    if kind == 6:
        return one, zero, zero, -1j
    if kind == 7:
        return one, zero, zero, complex(r, r)
    if kind == 8:
        return one, zero, zero, complex(r, -r)
    c = math.cos(0.5 * theta)
    s = math.sin(0.5 * theta)
    if kind == 9:
        return c * one, -1j * s, -1j * s, c * one
    if kind == 10:
        return c * one, -s * one, s * one, c * one
    if kind == 11:
        return complex(c, -s), zero, zero, complex(c, s)
    return one, zero, zero, complex(math.cos(theta), math.sin(theta))


@njit(cache=True, nogil=True)
def simulate_arrays(n, length, kinds, q0, q1, theta, psi):
    """Run a gate-array circuit on |0...0> in place (little-endian amplitudes)."""
    dim = 1 << n
    psi[:] = 0.0
    psi[0] = 1.0
    for j in range(length):
        m00, m01, m10, m11 = _kernel_matrix(kinds[j], theta[j])
        if kinds[j] >= _FIRST_2Q:
            cbit = 1 << q0[j]
            tbit = 1 << q1[j]
            for i in range(dim):
                if (i & cbit) and not (i & tbit):
                    a = psi[i]
                    b = psi[i | tbit]
                    psi[i] = m00 * a + m01 * b
                    psi[i | tbit] = m10 * a + m11 * b
        else:
            tbit = 1 << q0[j]
            for i in range(dim):
                if not (i & tbit):
                    a = psi[i]
                    b = psi[i | tbit]
                    psi[i] = m00 * a + m01 * b
                    psi[i | tbit] = m10 * a + m11 * b


@njit(cache=True, nogil=True)
def depth_arrays(n, length, q0, q1):
    last = np.full(n, -1, dtype=np.int64)
    depth = 0
    for j in range(length):
        layer = last[q0[j]]
        if q1[j] >= 0 and last[q1[j]] > layer:
            layer = last[q1[j]]
        layer += 1
        last[q0[j]] = layer
        if q1[j] >= 0:
            last[q1[j]] = layer
        if layer + 1 > depth:
            depth = layer + 1
    return depth


@njit(cache=True, nogil=True)
def _sample_chunk(seed, start, n, max_gates, target, fid, gates, depth):
    kinds = np.empty(max_gates, dtype=np.int64)
    q0 = np.empty(max_gates, dtype=np.int64)
    q1 = np.empty(max_gates, dtype=np.int64)
    theta = np.empty(max_gates, dtype=np.float64)
    psi = np.empty(1 << n, dtype=np.complex128)
    state = np.empty(1, dtype=np.uint64)
    for i in range(fid.shape[0]):
        state[0] = rng.derive_word(seed, np.uint64(start + i))
        length = draw_circuit(state, n, max_gates, kinds, q0, q1, theta)
        simulate_arrays(n, length, kinds, q0, q1, theta, psi)
        amp = 0.0j
        for k in range(psi.shape[0]):
            amp += target[k].conjugate() * psi[k]
        f = amp.real * amp.real + amp.imag * amp.imag
        fid[i] = min(1.0, max(0.0, f))
        gates[i] = length
        depth[i] = depth_arrays(n, length, q0, q1)


# -- Python surface ------------------------------------------------------------

def arrays_to_circuit(n, length, kinds, q0, q1, theta, max_gates=50) -> Circuit:
    gates = []
    for j in range(length):
        kind = GateKind(int(kinds[j]))
        qubits = (int(q0[j]),) if kind.n_qubits == 1 else (int(q0[j]), int(q1[j]))
        params = (float(theta[j]),) if kind.n_params else ()
        gates.append(Gate(kind, qubits, params))
    return Circuit(n, tuple(gates), max_gates)


def random_circuit(cfg: SamplerConfig, rng_state: np.ndarray) -> Circuit:
    """Draw one circuit from ``rng_state`` (advanced in place).

    Uses the same kernel as :func:`sample_ensemble`, so
    ``random_circuit(cfg, make_stream(cfg.seed, i))`` is ensemble member ``i``.
    """
    m = cfg.max_gates
    kinds = np.empty(m, dtype=np.int64)
    q0 = np.empty(m, dtype=np.int64)
    q1 = np.empty(m, dtype=np.int64)
    theta = np.empty(m, dtype=np.float64)
    length = draw_circuit(rng_state, cfg.n_qubits, m, kinds, q0, q1, theta)
    return arrays_to_circuit(cfg.n_qubits, length, kinds, q0, q1, theta, m)


def random_gate(n_qubits: int, rng_state: np.ndarray) -> Gate:
    kind, a, b, theta = draw_gate(rng_state, n_qubits)
    kind = GateKind(int(kind))
    qubits = (int(a),) if kind.n_qubits == 1 else (int(a), int(b))
    return Gate(kind, qubits, (float(theta),) if kind.n_params else ())


@dataclass
class Samples:
    """Column-oriented block of sample records."""

    fidelity: np.ndarray
    gate_count: np.ndarray
    depth: np.ndarray

    def __len__(self):
        return len(self.fidelity)

    def records(self) -> Iterator[SampleRecord]:
        for f, g, d in zip(self.fidelity.tolist(), self.gate_count.tolist(), self.depth.tolist()):
            yield SampleRecord(f, g, d)

    @classmethod
    def concat(cls, blocks: Iterable["Samples"]) -> "Samples":
        blocks = list(blocks)
        if not blocks:
            return cls(np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        return cls(
            np.concatenate([b.fidelity for b in blocks]),
            np.concatenate([b.gate_count for b in blocks]),
            np.concatenate([b.depth for b in blocks]),
        )

    @classmethod
    def from_records(cls, records: Iterable[SampleRecord]) -> "Samples":
        rows = list(records)
        return cls(
            np.array([r[0] for r in rows], dtype=float),
            np.array([r[1] for r in rows], dtype=np.int64),
            np.array([r[2] for r in rows], dtype=np.int64),
        )


def _run_chunk(cfg: SamplerConfig, target: np.ndarray, start: int, count: int) -> Samples:
    fid = np.empty(count, dtype=np.float64)
    gates = np.empty(count, dtype=np.int64)
    depth = np.empty(count, dtype=np.int64)
    _sample_chunk(np.uint64(cfg.seed), start, cfg.n_qubits, cfg.max_gates, target, fid, gates, depth)
    return Samples(fid, gates, depth)


def iter_sample_chunks(cfg: SamplerConfig, threads: int = 1,
                       chunk_size: int = CHUNK_SIZE) -> Iterator[tuple[int, Samples]]:
    """Yield ``(start_index, block)`` in index order."""
    target = target_state(cfg.n_qubits).amplitudes
    starts = list(range(0, cfg.num_samples, chunk_size))
    spans = [(s, min(chunk_size, cfg.num_samples - s)) for s in starts]
    done = 0
    next_report = PROGRESS_EVERY
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        window = max(1, 2 * threads)
        for w in range(0, len(spans), window):
            futures = [pool.submit(_run_chunk, cfg, target, s, c) for s, c in spans[w:w + window]]
            for (s, _), fut in zip(spans[w:w + window], futures):
                try:
                    block = fut.result()
                except MemoryError as exc:
                    raise MemoryError(f"out of memory after {done} of {cfg.num_samples} samples") from exc
                done += len(block)
                while done >= next_report:
                    log.info("sampled %d / %d circuits", next_report, cfg.num_samples)
                    next_report += PROGRESS_EVERY
                yield s, block


def sample_ensemble(cfg: SamplerConfig, threads: int = 1) -> Samples:
    return Samples.concat(block for _, block in iter_sample_chunks(cfg, threads))


# -- binning -------------------------------------------------------------------

class Bin(NamedTuple):
    lo: float
    hi: float
    count: int
    mean_fidelity: float
    probability: float


BINS_HEADER = ["bin_lo", "bin_hi", "count", "mean_fidelity", "probability"]
SAMPLES_HEADER = ["fidelity", "gate_count", "depth"]


@dataclass
class BinnedDistribution:
    """Equal-width histogram of fidelities on [0, 1]; empty bins have NaN mean."""

    lo: np.ndarray
    hi: np.ndarray
    count: np.ndarray
    mean_fidelity: np.ndarray
    probability: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.count)

    @property
    def total(self) -> int:
        return int(self.count.sum())

    @property
    def bins(self) -> list[Bin]:
        return [Bin(*row) for row in zip(self.lo.tolist(), self.hi.tolist(), self.count.tolist(),
                                         self.mean_fidelity.tolist(), self.probability.tolist())]

    @property
    def nonempty(self) -> np.ndarray:
        return self.count > 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BINS_HEADER)
        for b in self.bins:
            w.writerow([repr(b.lo), repr(b.hi), b.count, repr(b.mean_fidelity), repr(b.probability)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BinnedDistribution":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != BINS_HEADER:
            raise ParseError(1, f"expected header {','.join(BINS_HEADER)}")
        cols = [[] for _ in BINS_HEADER]
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(BINS_HEADER):
                raise ParseError(lineno, f"expected {len(BINS_HEADER)} fields, got {len(row)}")
            try:
                vals = [float(row[0]), float(row[1]), int(row[2]), float(row[3]), float(row[4])]
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            for col, v in zip(cols, vals):
                col.append(v)
        if not cols[0]:
            raise ParseError(len(rows), "no bins")
        return cls(np.array(cols[0]), np.array(cols[1]), np.array(cols[2], dtype=np.int64),
                   np.array(cols[3]), np.array(cols[4]))


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def bin_index(fidelity: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin of each fidelity; 1.0 lands in the last (closed) bin."""
    idx = np.floor(np.asarray(fidelity, dtype=float) * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


class BinAccumulator:
    """Mergeable partial histogram (counts and fidelity sums per bin)."""

    def __init__(self, n_bins: int = DEFAULT_BINS):
        if n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {n_bins}")
        self.n_bins = n_bins
        self.counts = np.zeros(n_bins, dtype=np.int64)
        self.sums = np.zeros(n_bins, dtype=np.float64)

    def add(self, fidelity) -> "BinAccumulator":
        f = np.asarray(fidelity, dtype=float)
        idx = bin_index(f, self.n_bins)
        self.counts += np.bincount(idx, minlength=self.n_bins)
        self.sums += np.bincount(idx, weights=f, minlength=self.n_bins)
        return self

    def merge(self, other: "BinAccumulator") -> "BinAccumulator":
        if other.n_bins != self.n_bins:
            raise ValueError("cannot merge histograms with different bin counts")
        out = BinAccumulator(self.n_bins)
        out.counts = self.counts + other.counts
        out.sums = self.sums + other.sums
        return out

    def result(self) -> BinnedDistribution:
        total = int(self.counts.sum())
        if total == 0:
            raise ValueError("cannot bin an empty set of records")
        edges = np.arange(self.n_bins + 1) / self.n_bins
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(self.counts > 0, self.sums / self.counts, np.nan)
        lo, hi = edges[:-1], edges[1:]
        # guard float rounding so each mean stays inside its own bin
        mean = np.where(self.counts > 0, np.clip(mean, lo, hi), np.nan)
        return BinnedDistribution(lo, hi, self.counts.copy(), mean, self.counts / total)


def _fidelities(records) -> np.ndarray:
    if isinstance(records, Samples):
        return records.fidelity
    return np.array([r[0] if isinstance(r, tuple) else r for r in records], dtype=float)


def bin_samples(records, n_bins: int = DEFAULT_BINS) -> BinnedDistribution:
    return BinAccumulator(n_bins).add(_fidelities(records)).result()


# -- correlation ---------------------------------------------------------------

_FIELDS = ("gate_count", "depth")


def _columns(records) -> Samples:
    return records if isinstance(records, Samples) else Samples.from_records(records)


def pearson(records, field: str) -> float:
    """Sample Pearson coefficient between fidelity and ``field``."""
    if field not in _FIELDS:
        raise ValueError(f"field must be one of {_FIELDS}, got {field!r}")
    s = _columns(records)
    x = s.fidelity.astype(float)
    y = getattr(s, field).astype(float)
    if len(x) < 2:
        raise UndefinedStatistic("pearson needs at least 2 records")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatistic(f"zero variance in fidelity or {field}")
    return max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))


class CorrelationAccumulator:
    """Mergeable co-moments of (fidelity, gate_count, depth) (Chan et al. update)."""

    def __init__(self):
        self.count = 0
        self.mean = np.zeros(3)
        self.comoment = np.zeros((3, 3))

    def add(self, block: Samples) -> "CorrelationAccumulator":
        if len(block) == 0:
            return self
        data = np.stack([block.fidelity, block.gate_count, block.depth]).astype(float)
        part = CorrelationAccumulator()
        part.count = data.shape[1]
        part.mean = data.mean(axis=1)
        centred = data - part.mean[:, None]
        part.comoment = centred @ centred.T
        merged = self.merge(part)
        self.count, self.mean, self.comoment = merged.count, merged.mean, merged.comoment
        return self

    def merge(self, other: "CorrelationAccumulator") -> "CorrelationAccumulator":
        out = CorrelationAccumulator()
        n = self.count + other.count
        out.count = n
        if n == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * (other.count / n)
        out.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.count * other.count / n)
        return out

    def pearson(self, field: str) -> float:
        j = 1 + _FIELDS.index(field)
        sxx, syy, sxy = self.comoment[0, 0], self.comoment[j, j], self.comoment[0, j]
        if self.count < 2 or sxx <= 0.0 or syy <= 0.0:
            raise UndefinedStatistic(f"pearson undefined for fidelity vs {field}")
        return max(-1.0, min(1.0, float(sxy / math.sqrt(sxx * syy))))


# -- CSV -------------------------------------------------------------------------

def samples_csv_rows(block: Samples) -> str:
    return "".join(
        f"{f:.9f},{g},{d}\n"
        for f, g, d in zip(block.fidelity.tolist(), block.gate_count.tolist(), block.depth.tolist())
    )


def read_samples_csv(text: str) -> Samples:
    lines = text.splitlines()
    if not lines or lines[0].split(",") != SAMPLES_HEADER:
        raise ParseError(1, f"expected header {','.join(SAMPLES_HEADER)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 fields, got {len(parts)}")
        try:
            rows.append(SampleRecord(float(parts[0]), int(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    return Samples.from_records(rows)


@dataclass
class EnsembleSummary:
    n: int
    num_samples: int
    pearson_gates: float | None
    pearson_depth: float | None
    frac_f_lt_0_5: float
    frac_f_ge_0_99: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "num_samples": self.num_samples,
            "pearson_gates": self.pearson_gates,
            "pearson_depth": self.pearson_depth,
            "frac_f_lt_0.5": self.frac_f_lt_0_5,
            "frac_f_ge_0.99": self.frac_f_ge_0_99,
        }


def run_ensemble(cfg: SamplerConfig, n_bins: int = DEFAULT_BINS, threads: int = 1,
                 samples_out: io.TextIOBase | None = None):
    """Single pass over the ensemble: histogram, correlations, optional CSV stream.

    Returns ``(BinnedDistribution | None, EnsembleSummary)``; the histogram is
    ``None`` when ``num_samples`` is 0.
    """
    hist = BinAccumulator(n_bins)
    corr = CorrelationAccumulator()
    low = high = 0
    if samples_out is not None:
        samples_out.write(",".join(SAMPLES_HEADER) + "\n")
    for _, block in iter_sample_chunks(cfg, threads):
        hist.add(block.fidelity)
        corr.add(block)
        low += int(np.count_nonzero(block.fidelity < 0.5))
        high += int(np.count_nonzero(block.fidelity >= 0.99))
        if samples_out is not None:
            samples_out.write(samples_csv_rows(block))

    def _maybe(field):
        try:
            return corr.pearson(field)
        except UndefinedStatistic:
            return None

    total = max(cfg.num_samples, 1)
    summary = EnsembleSummary(cfg.n_qubits, cfg.num_samples, _maybe("gate_count"), _maybe("depth"),
                              low / total, high / total)
    return (hist.result() if cfg.num_samples else None), summary
