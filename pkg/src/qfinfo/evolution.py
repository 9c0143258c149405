"""Elitist, mutation-only evolutionary search over circuits.

Each generation is evaluated, ranked, truncated to the top 40% and refilled
with mutated copies of uniformly chosen elites.  Child ``s`` of generation
``g`` draws all of its randomness from the stream ``(seed, g, s)``, so a run
is reproducible whatever the evaluation parallelism.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .circuit import (
    MAX_QUBITS_DENSITY,
    Circuit,
    Gate,
    avg_entropy,
    circuit_depth,
    fidelity_pure,
    simulate,
    target_state,
)
from .noise import NoiseModel, robustness
from .qfi import QfiCurve
from .sampling import SamplerConfig, random_circuit, random_gate

_INIT_STREAM = 0
_MUTATION_STREAM = 1
_TWO_PI = 2.0 * math.pi


class Mode(str, enum.Enum):
    FIDELITY = "fidelity"
    QFI = "qfi"


@dataclass(frozen=True)
class Objective:
    mode: Mode = Mode.FIDELITY
    curve: QfiCurve | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.QFI and self.curve is None:
            raise ValueError("qfi objective requires a QFI curve")

    def check(self, n_qubits: int) -> None:
        if self.mode is Mode.QFI and self.curve.n_qubits not in (None, n_qubits):
            raise ValueError(f"curve was built for {self.curve.n_qubits} qubits, run uses {n_qubits}")


@dataclass(frozen=True)
class EvoConfig:
    n_qubits: int
    pop_size: int = 60
    generations: int = 80
    elite_fraction: float = 0.4
    max_gates: int = 50
    noise: NoiseModel = field(default_factory=NoiseModel)
    angle_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.n_qubits <= MAX_QUBITS_DENSITY:
            raise ValueError(f"n_qubits must be in [2, {MAX_QUBITS_DENSITY}], got {self.n_qubits}")
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction must lie in (0, 1]")
        if self.max_gates < 1:
            raise ValueError("max_gates must be >= 1")

    @property
    def n_elites(self) -> int:
        return max(1, math.ceil(self.elite_fraction * self.pop_size - 1e-9))

    @property
    def sampler(self) -> SamplerConfig:
        return SamplerConfig(self.n_qubits, self.max_gates, self.pop_size, self.seed)


@dataclass(frozen=True)
class Metrics:
    fidelity: float
    sv: float
    robustness: float
    depth: int
    gate_count: int


@dataclass(frozen=True)
class Individual:
    circuit: Circuit
    metrics: Metrics
    score: float
    score_raw: float
    generation: int = 0


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_score: float
    mean_fid: float
    median_fid: float
    iqr_fid: float
    mean_sv: float
    mean_rob: float
    mean_depth: float
    mean_gates: float


@dataclass
class EvolutionResult:
    best: Individual
    history: list[GenerationStats]
    all_samples: list[Individual]
    final_population: list[Individual]
    final_stats: GenerationStats


def compute_metrics(c: Circuit, noise: NoiseModel) -> Metrics:
    tau = target_state(c.n_qubits)
    psi = simulate(c)
    fid = fidelity_pure(psi, tau)
    rob = robustness(c, noise, tau, f_ideal=fid)
    return Metrics(fid, avg_entropy(psi), rob, circuit_depth(c), len(c))


def score(metrics: Metrics, objective: Objective) -> tuple[float, float]:
    """``(score, score_raw)``; QFI scores are normalised by the curve maximum."""
    if objective.mode is Mode.FIDELITY:
        return metrics.fidelity, metrics.fidelity
    raw = float(objective.curve.smooth_at(metrics.fidelity))
    top = objective.curve.smooth_max
    normed = raw / top if top > 0 else 0.0
    return min(1.0, max(0.0, normed)), raw


def evaluate(c: Circuit, cfg: EvoConfig, objective: Objective, generation: int = 0,
             metrics: Metrics | None = None) -> Individual:
    m = compute_metrics(c, cfg.noise) if metrics is None else metrics
    s, raw = score(m, objective)
    return Individual(c, m, s, raw, generation)


def sort_key(ind: Individual, index: int = 0):
    return (-ind.score, ind.metrics.depth, ind.metrics.gate_count, index)


def rank(population: list[Individual]) -> list[Individual]:
    order = sorted(range(len(population)), key=lambda i: sort_key(population[i], i))
    return [population[i] for i in order]


def init_population(cfg: EvoConfig) -> list[Circuit]:
    sc = cfg.sampler
    return [random_circuit(sc, rng.make_stream(cfg.seed, _INIT_STREAM, i)) for i in range(cfg.pop_size)]


def mutate(parent: Circuit, cfg: EvoConfig, rng_state: np.ndarray) -> Circuit:
    """Apply one of angle-perturb / insert / delete, chosen among those applicable."""
    gates = list(parent.gates)
    param_slots = [j for j, g in enumerate(gates) if g.is_parameterized]
    ops = []
    if param_slots:
        ops.append("angle")
    if len(gates) < cfg.max_gates:
        ops.append("insert")
    if len(gates) > 1:
        ops.append("delete")
    if not ops:
        return parent
    op = ops[rng.randint(rng_state, len(ops))]
    if op == "angle":
        j = param_slots[rng.randint(rng_state, len(param_slots))]
        g = gates[j]
        theta = (g.params[0] + cfg.angle_sigma * rng.normal(rng_state)) % _TWO_PI
        gates[j] = Gate(g.kind, g.qubits, (theta,))
    elif op == "insert":
        pos = rng.randint(rng_state, len(gates) + 1)
        gates.insert(pos, random_gate(parent.n_qubits, rng_state))
    else:
        del gates[rng.randint(rng_state, len(gates))]
    return Circuit(parent.n_qubits, tuple(gates), cfg.max_gates)


def population_stats(generation: int, population: list[Individual]) -> GenerationStats:
    fid = np.array([p.metrics.fidelity for p in population])
    q1, q3 = np.percentile(fid, [25, 75])
    return GenerationStats(
        generation=generation,
        best_score=max(p.score for p in population),
        mean_fid=float(fid.mean()),
        median_fid=float(np.median(fid)),
        iqr_fid=float(q3 - q1),
        mean_sv=float(np.mean([p.metrics.sv for p in population])),
        mean_rob=float(np.mean([p.metrics.robustness for p in population])),
        mean_depth=float(np.mean([p.metrics.depth for p in population])),
        mean_gates=float(np.mean([p.metrics.gate_count for p in population])),
    )


class _Evaluator:
    def __init__(self, cfg: EvoConfig, objective: Objective, threads: int):
        self.cfg = cfg
        self.objective = objective
        self.threads = max(1, threads)
        self.cache: dict[Circuit, Metrics] = {}

    def __call__(self, circuits: list[Circuit], generation: int) -> list[Individual]:
        todo = list(dict.fromkeys(c for c in circuits if c not in self.cache))
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda c: compute_metrics(c, self.cfg.noise), todo))
        else:
            results = [compute_metrics(c, self.cfg.noise) for c in todo]
        self.cache.update(zip(todo, results))
        return [evaluate(c, self.cfg, self.objective, generation, self.cache[c]) for c in circuits]


def evolve(cfg: EvoConfig, objective: Objective, threads: int = 1) -> EvolutionResult:
    objective.check(cfg.n_qubits)
    run = _Evaluator(cfg, objective, threads)
    population = init_population(cfg)
    history: list[GenerationStats] = []
    all_samples: list[Individual] = []
    n_elites = min(cfg.n_elites, cfg.pop_size)

    for gen in range(cfg.generations):
        scored = run(population, gen)
        all_samples.extend(scored)
        ranked = rank(scored)
        history.append(population_stats(gen, ranked))
        elites = [ind.circuit for ind in ranked[:n_elites]]
        population = list(elites)
        for slot in range(n_elites, cfg.pop_size):
            stream = rng.make_stream(cfg.seed, _MUTATION_STREAM, gen, slot)
            parent = elites[rng.randint(stream, n_elites)]
            population.append(mutate(parent, cfg, stream))

    final = rank(run(population, cfg.generations))
    all_samples.extend(final)
    return EvolutionResult(final[0], history, all_samples, final,
                           population_stats(cfg.generations, final))


# -- serialisation ---------------------------------------------------------------

HISTORY_HEADER = ["generation", "best_score", "mean_fid", "median_fid", "iqr_fid",
                  "mean_sv", "mean_rob", "mean_depth", "mean_gates"]
SAMPLES_HEADER = ["generation", "score", "score_raw", "fidelity", "sv", "robustness", "depth", "gates"]


def history_csv(history: list[GenerationStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_HEADER)
    for h in history:
        w.writerow([h.generation] + [repr(getattr(h, k)) for k in HISTORY_HEADER[1:]])
    return buf.getvalue()


def read_history_csv(text: str) -> list[GenerationStats]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != HISTORY_HEADER:
        raise ValueError(f"line 1: expected header {','.join(HISTORY_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            out.append(GenerationStats(int(row[0]), *(float(v) for v in row[1:])))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


def samples_csv(samples: list[Individual]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLES_HEADER)
    for s in samples:
        m = s.metrics
        w.writerow([s.generation, repr(s.score), repr(s.score_raw), repr(m.fidelity), repr(m.sv),
                    repr(m.robustness), m.depth, m.gate_count])
    return buf.getvalue()


def read_samples_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != SAMPLES_HEADER:
        raise ValueError(f"line 1: expected header {','.join(SAMPLES_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            out.append({
                "generation": int(row[0]), "score": float(row[1]), "score_raw": float(row[2]),
                "fidelity": float(row[3]), "sv": float(row[4]), "robustness": float(row[5]),
                "depth": int(row[6]), "gates": int(row[7]),
            })
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


def best_to_dict(ind: Individual) -> dict:
    m = ind.metrics
    return ind.circuit.to_dict() | {
        "metrics": {"fidelity": m.fidelity, "sv": m.sv, "robustness": m.robustness,
                    "depth": m.depth, "gates": m.gate_count},
        "score": ind.score,
        "score_raw": ind.score_raw,
    }


# -- objective comparison --------------------------------------------------------

COMPARE_HEADER = ["row", "mode", "seed"] + HISTORY_HEADER[2:] + ["best_score", "best_fidelity"]


@dataclass
class Comparison:
    seeds: list[int]
    runs: dict[Mode, list[EvolutionResult]]

    def pooled(self, mode: Mode) -> list[Individual]:
        return [ind for r in self.runs[mode] for ind in r.final_population]

    def aggregate(self, mode: Mode) -> GenerationStats:
        return population_stats(-1, self.pooled(mode))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARE_HEADER)

        def row(kind, mode, seed, stats, best):
            w.writerow([kind, mode.value, seed] + [repr(getattr(stats, k)) for k in HISTORY_HEADER[2:]]
                       + [repr(best.score), repr(best.metrics.fidelity)])

        for mode, results in self.runs.items():
            for seed, r in zip(self.seeds, results):
                row("run", mode, seed, r.final_stats, r.best)
        for mode in self.runs:
            row("aggregate", mode, "", self.aggregate(mode), rank(self.pooled(mode))[0])
        return buf.getvalue()


def compare_objectives(base: EvoConfig, curve: QfiCurve, seeds, threads: int = 1) -> Comparison:
    """Run both objectives for every seed with identical budgets."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("comparison needs at least 2 seeds")
    objectives = {Mode.FIDELITY: Objective(Mode.FIDELITY), Mode.QFI: Objective(Mode.QFI, curve)}
    runs = {mode: [] for mode in objectives}
    for seed in seeds:
        cfg = EvoConfig(base.n_qubits, base.pop_size, base.generations, base.elite_fraction,
                        base.max_gates, base.noise, base.angle_sigma, seed)
        for mode, objective in objectives.items():
            runs[mode].append(evolve(cfg, objective, threads))
    return Comparison(seeds, runs)
