"""Command line entry point: ``qfinfo sample | fit | evolve | compare``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import plotting
from .config import ConfigError, RunConfig, load_config
from .evolution import (
    Mode,
    Objective,
    best_to_dict,
    compare_objectives,
    evolve,
    history_csv,
    samples_csv,
)
from .qfi import QfiCurve, build_qfi_curve
from .sampling import BinnedDistribution, run_ensemble

log = logging.getLogger("qfinfo")


def _guard(fn):
    """Map failures onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(2)
        except (ValueError, OSError, RuntimeError, MemoryError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _settings(config: str | None, seed: int | None) -> RunConfig:
    cfg = load_config(config)
    if seed is not None:
        if not 0 <= seed < 1 << 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        cfg = cfg.with_seed(seed)
    return cfg


def _load_curve(path: str) -> QfiCurve:
    try:
        return QfiCurve.from_json(Path(path).read_text())
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load curve {path}: {exc}") from None


config_opt = click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
                          help="Run config JSON.")
out_opt = click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True,
                       help="Output directory.")
seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")
threads_opt = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                           help="Worker threads; never changes results.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Quantum functional information of random and evolved circuits."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(asctime)s %(name)s: %(message)s", stream=sys.stderr)


@main.command()
@config_opt
@out_opt
@seed_opt
@threads_opt
@click.option("--n-qubits", type=int, default=None, help="Override sampler.n_qubits.")
@click.option("--num-samples", type=int, default=None, help="Override sampler.num_samples.")
@_guard
def sample(config, out, seed, threads, n_qubits, num_samples):
    """Sample random circuits; write samples.csv, bins.csv and summary.json."""
    cfg = _settings(config, seed)
    section = cfg.sampler
    try:
        sc = section.build()
        if n_qubits is not None or num_samples is not None:
            sc = type(sc)(n_qubits or sc.n_qubits, sc.max_gates,
                          sc.num_samples if num_samples is None else num_samples, sc.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    outdir = _outdir(out)
    with open(outdir / "samples.csv", "w", newline="") as fh:
        bins, summary = run_ensemble(sc, section.n_bins, threads, samples_out=fh)
    if bins is not None:
        (outdir / "bins.csv").write_text(bins.to_csv())
        plotting.fidelity_histogram(bins, outdir / "fidelity_histogram.svg",
                                    title=f"n = {sc.n_qubits}, {sc.num_samples} circuits")
    text = json.dumps(summary.to_dict(), indent=2)
    (outdir / "summary.json").write_text(text + "\n")
    click.echo(text)


@main.command()
@click.argument("bins_csv", type=click.Path(dir_okay=False))
@config_opt
@out_opt
@click.option("--n-qubits", type=int, default=None,
              help="Qubit count recorded in the curve (default: summary.json beside the bins).")
@_guard
def fit(bins_csv, config, out, n_qubits):
    """Fit the QFI curve to a bins CSV; write qfi.csv and curve.json."""
    cfg = _settings(config, None)
    bins_path = Path(bins_csv)
    try:
        text = bins_path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {bins_path}: {exc.strerror}") from None
    bins = BinnedDistribution.from_csv(text)
    if n_qubits is None:
        summary = bins_path.with_name("summary.json")
        if summary.exists():
            n_qubits = json.loads(summary.read_text()).get("n")
    curve = build_qfi_curve(bins, cfg.qfi, n_qubits=n_qubits)
    outdir = _outdir(out)
    (outdir / "qfi.csv").write_text(curve.to_csv())
    (outdir / "curve.json").write_text(curve.to_json())
    plotting.qfi_curve(curve, outdir / "qfi_curve.svg", bins=bins)
    g = curve.grid
    click.echo(json.dumps({"tree_r2": curve.params["tree_r2"],
                           "argmax_fidelity": float(g[curve.qfi_smooth.argmax()]),
                           "max_bits": curve.smooth_max,
                           "bits_at_1": float(curve.qfi_smooth[-1])}, indent=2))


def _evo_config(cfg: RunConfig, n_qubits):
    section = cfg.evolution
    if n_qubits is not None:
        section = type(section)(**{**section.__dict__, "n_qubits": n_qubits})
    try:
        return section.build(cfg.noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@main.command("evolve")
@config_opt
@out_opt
@seed_opt
@threads_opt
@click.option("--objective", type=click.Choice([m.value for m in Mode]), default="fidelity",
              show_default=True)
@click.option("--curve", "curve_path", type=click.Path(dir_okay=False), default=None,
              help="Curve JSON from `fit`; required for --objective qfi.")
@click.option("--n-qubits", type=int, default=None, help="Override evolution.n_qubits.")
@_guard
def evolve_cmd(config, out, seed, threads, objective, curve_path, n_qubits):
    """Evolve circuits; write history.csv, samples.csv and best.json."""
    cfg = _settings(config, seed)
    evo = _evo_config(cfg, n_qubits)
    mode = Mode(objective)
    if mode is Mode.QFI and curve_path is None:
        raise ConfigError("--objective qfi requires --curve")
    curve = _load_curve(curve_path) if curve_path else None
    obj = Objective(mode, curve if mode is Mode.QFI else None)
    try:
        obj.check(evo.n_qubits)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = evolve(evo, obj, threads)
    outdir = _outdir(out)
    (outdir / "history.csv").write_text(history_csv(result.history))
    (outdir / "samples.csv").write_text(samples_csv(result.all_samples))
    (outdir / "best.json").write_text(json.dumps(best_to_dict(result.best), indent=2) + "\n")
    plotting.evolution_history(result.history, outdir / "history.svg",
                               title=f"{mode.value} objective, n = {evo.n_qubits}")
    click.echo(json.dumps(best_to_dict(result.best)["metrics"], indent=2))


@main.command()
@config_opt
@out_opt
@threads_opt
@click.option("--curve", "curve_path", type=click.Path(dir_okay=False), required=True,
              help="Curve JSON from `fit`.")
@click.option("--seeds", default=None, help="Comma-separated seeds (default: compare.seeds).")
@click.option("--n-qubits", type=int, default=None, help="Override evolution.n_qubits.")
@_guard
def compare(config, out, threads, curve_path, seeds, n_qubits):
    """Run both objectives over several seeds and compare final populations."""
    cfg = _settings(config, None)
    evo = _evo_config(cfg, n_qubits)
    curve = _load_curve(curve_path)
    try:
        seed_list = [int(s) for s in seeds.split(",")] if seeds else list(cfg.compare.seeds)
        Objective(Mode.QFI, curve).check(evo.n_qubits)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if len(seed_list) < 2:
        raise ConfigError("compare needs at least 2 seeds")
    result = compare_objectives(evo, curve, seed_list, threads)
    outdir = _outdir(out)
    (outdir / "comparison.csv").write_text(result.to_csv())
    pooled = {m.value: result.pooled(m) for m in result.runs}
    for metric, get in [("fidelity", lambda i: i.metrics.fidelity), ("sv", lambda i: i.metrics.sv),
                        ("robustness", lambda i: i.metrics.robustness), ("depth", lambda i: i.metrics.depth),
                        ("gates", lambda i: i.metrics.gate_count)]:
        plotting.metric_boxplot({m: [get(i) for i in inds] for m, inds in pooled.items()}, metric,
                                outdir / f"boxplot_{metric}.svg")
    qfi_samples = [s for r in result.runs[Mode.QFI] for s in r.all_samples]
    plotting.score_scatter([s.metrics.fidelity for s in qfi_samples], [s.score for s in qfi_samples],
                           outdir / "score_scatter.svg")
    summary = {m.value: result.aggregate(m).__dict__ for m in result.runs}
    click.echo(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
