import json

import numpy as np
import pytest
from click.testing import CliRunner

from qfinfo.cli import main
from qfinfo.config import ConfigError, RunConfig, config_from_dict, load_config
from qfinfo.evolution import read_history_csv, read_samples_csv as read_evo_samples
from qfinfo.qfi import QfiCurve
from qfinfo.sampling import BinnedDistribution, read_samples_csv


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def write_config(path, **sections):
    path.write_text(json.dumps({"schema_version": 1, **sections}))
    return path


@pytest.fixture(scope="module")
def small_config(tmp_path_factory):
    d = tmp_path_factory.mktemp("cfg")
    return write_config(
        d / "config.json",
        sampler={"n_qubits": 2, "num_samples": 1000, "n_bins": 50},
        evolution={"n_qubits": 2, "pop_size": 6, "generations": 3},
    )


@pytest.fixture(scope="module")
def fitted(tmp_path_factory, small_config):
    d = tmp_path_factory.mktemp("fit")
    assert invoke("sample", "--config", small_config, "--out", d, "--num-samples", 20000).exit_code == 0
    assert invoke("fit", d / "bins.csv", "--out", d).exit_code == 0
    return d


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg == RunConfig()
        assert cfg.sampler.n_bins == 200
        assert cfg.compare.seeds == tuple(range(10))

    def test_round_trip(self):
        cfg = config_from_dict({"sampler": {"n_qubits": 3}, "noise": {"p1": 0}, "compare": {"seeds": [4, 5]}})
        assert cfg.noise.p1 == 0.0 and isinstance(cfg.noise.p1, float)
        assert config_from_dict(json.loads(cfg.to_json())) == cfg

    @pytest.mark.parametrize("data", [
        {"schema_version": 2},
        {"extra": {}},
        {"sampler": {"bogus": 1}},
        {"sampler": {"n_qubits": 1}},
        {"sampler": {"n_qubits": "4"}},
        {"sampler": {"num_samples": 1.5}},
        {"noise": {"p1": True}},
        {"noise": {"p1": 2.0}},
        {"qfi": {"grid_points": 1}},
        {"compare": {"seeds": "0,1"}},
        {"evolution": []},
        [],
    ])
    def test_rejected(self, data):
        with pytest.raises(ConfigError):
            config_from_dict(data)

    def test_with_seed(self):
        cfg = RunConfig().with_seed(7)
        assert cfg.sampler.seed == cfg.evolution.seed == 7

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        (tmp_path / "bad.json").write_text("{nope")
        with pytest.raises(ConfigError, match="line 1"):
            load_config(tmp_path / "bad.json")


class TestSample:
    def test_outputs(self, tmp_path, small_config):
        r = invoke("sample", "--config", small_config, "--out", tmp_path)
        assert r.exit_code == 0
        samples = read_samples_csv((tmp_path / "samples.csv").read_text())
        assert len(samples) == 1000
        bins = BinnedDistribution.from_csv((tmp_path / "bins.csv").read_text())
        assert bins.n_bins == 50 and bins.total == 1000
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary == json.loads(r.output)
        assert summary["n"] == 2 and summary["num_samples"] == 1000
        assert (tmp_path / "fidelity_histogram.svg").read_text().lstrip().startswith("<?xml")

    def test_byte_identical(self, tmp_path, small_config):
        for d, t in (("a", 1), ("b", 3)):
            assert invoke("sample", "--config", small_config, "--out", tmp_path / d, "--threads", t).exit_code == 0
        for name in ("samples.csv", "bins.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_override(self, tmp_path, small_config):
        invoke("sample", "--config", small_config, "--out", tmp_path / "a")
        invoke("sample", "--config", small_config, "--out", tmp_path / "b", "--seed", 1)
        assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "b" / "samples.csv").read_bytes()

    def test_negative_correlation_n4(self, tmp_path):
        r = invoke("sample", "--out", tmp_path, "--n-qubits", 4, "--num-samples", 100_000)
        assert r.exit_code == 0
        assert json.loads(r.output)["pearson_gates"] < 0

    def test_config_error_exit_2(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", sampler={"nope": 1})
        assert invoke("sample", "--config", cfg, "--out", tmp_path).exit_code == 2
        assert invoke("sample", "--out", tmp_path, "--seed", -1).exit_code == 2
        assert invoke("sample", "--out", tmp_path, "--n-qubits", 1).exit_code == 2

    def test_unwritable_exit_1(self, tmp_path, small_config):
        blocker = tmp_path / "file"
        blocker.write_text("")
        r = CliRunner().invoke(main, ["sample", "--config", str(small_config), "--out", str(blocker / "x")])
        assert r.exit_code == 1
        assert "cannot create output directory" in r.output


class TestFit:
    def test_outputs(self, fitted):
        curve = QfiCurve.from_json((fitted / "curve.json").read_text())
        assert curve.n_qubits == 2
        rows = (fitted / "qfi.csv").read_text().splitlines()
        assert rows[0] == "fidelity,p_hat,qfi_raw,qfi_smooth" and len(rows) == 1002
        assert (fitted / "qfi_curve.svg").exists()

    def test_uniform_bins(self, tmp_path):
        n = 40
        lo = np.arange(n) / n
        bins = BinnedDistribution(lo, lo + 1 / n, np.full(n, 100), lo + 0.5 / n, np.full(n, 1 / n))
        (tmp_path / "bins.csv").write_text(bins.to_csv())
        assert invoke("fit", tmp_path / "bins.csv", "--out", tmp_path).exit_code == 0
        curve = QfiCurve.from_json((tmp_path / "curve.json").read_text())
        assert np.allclose(curve.qfi_raw, np.log2(n))
        assert curve.n_qubits is None

    def test_parse_errors(self, tmp_path):
        (tmp_path / "empty.csv").write_text("")
        r = CliRunner().invoke(main, ["fit", str(tmp_path / "empty.csv"), "--out", str(tmp_path)])
        assert r.exit_code == 1 and "line 1" in r.output
        (tmp_path / "bad.csv").write_text("bin_lo,bin_hi,count,mean_fidelity,probability\n0,1,x,0.5,1\n")
        r = CliRunner().invoke(main, ["fit", str(tmp_path / "bad.csv"), "--out", str(tmp_path)])
        assert r.exit_code == 1 and "line 2" in r.output
        r = CliRunner().invoke(main, ["fit", str(tmp_path / "missing.csv"), "--out", str(tmp_path)])
        assert r.exit_code == 1


class TestEvolve:
    def test_fidelity_n2(self, tmp_path):
        r = invoke("evolve", "--out", tmp_path, "--n-qubits", 2)
        assert r.exit_code == 0
        best = json.loads((tmp_path / "best.json").read_text())
        assert best["metrics"]["fidelity"] >= 0.99
        assert len(read_history_csv((tmp_path / "history.csv").read_text())) == 80
        assert len(read_evo_samples((tmp_path / "samples.csv").read_text())) == 81 * 60
        assert (tmp_path / "history.svg").exists()

    def test_qfi_requires_curve(self, tmp_path):
        assert invoke("evolve", "--out", tmp_path, "--objective", "qfi").exit_code == 2

    def test_curve_problems(self, tmp_path, fitted, small_config):
        r = invoke("evolve", "--out", tmp_path, "--objective", "qfi", "--curve", tmp_path / "none.json")
        assert r.exit_code == 2
        # curve built for 2 qubits, run at 4
        r = invoke("evolve", "--out", tmp_path, "--objective", "qfi", "--curve", fitted / "curve.json")
        assert r.exit_code == 2

    def test_deterministic(self, tmp_path, small_config, fitted):
        for d, t in (("a", 1), ("b", 4)):
            r = invoke("evolve", "--config", small_config, "--out", tmp_path / d, "--threads", t,
                       "--objective", "qfi", "--curve", fitted / "curve.json")
            assert r.exit_code == 0
        for name in ("history.csv", "samples.csv", "best.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestCompare:
    def test_outputs(self, tmp_path, small_config, fitted):
        r = invoke("compare", "--config", small_config, "--out", tmp_path, "--curve", fitted / "curve.json",
                   "--seeds", "0,1,2")
        assert r.exit_code == 0
        rows = (tmp_path / "comparison.csv").read_text().splitlines()
        assert len(rows) == 1 + 6 + 2
        for metric in ("fidelity", "sv", "robustness", "depth", "gates"):
            assert (tmp_path / f"boxplot_{metric}.svg").exists()
        assert (tmp_path / "score_scatter.svg").exists()
        assert set(json.loads(r.output)) == {"fidelity", "qfi"}

    def test_errors(self, tmp_path, small_config, fitted):
        curve = fitted / "curve.json"
        assert invoke("compare", "--config", small_config, "--out", tmp_path, "--curve", curve,
                      "--seeds", "0").exit_code == 2
        assert invoke("compare", "--config", small_config, "--out", tmp_path, "--curve", curve,
                      "--seeds", "a,b").exit_code == 2
        assert CliRunner().invoke(main, ["compare", "--out", str(tmp_path)]).exit_code == 2
