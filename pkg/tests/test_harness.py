import csv
import json

import numpy as np
import pytest

from frozenbessel.errors import UsageError
from frozenbessel.harness import config_from_mapping, load_config, run_experiment
from frozenbessel.harness.cli import main
from frozenbessel.harness.stats import (bonferroni_z, covariance_band, empirical_covariance,
                                        rate_regression, skewness_with_se)


def test_empirical_covariance_examples():
    np.testing.assert_array_equal(empirical_covariance(np.ones((5, 3))), np.zeros((3, 3)))
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(empirical_covariance([v, -v]), 2 * np.outer(v, v))
    x = np.random.default_rng(0).standard_normal((10**5, 2))
    np.testing.assert_allclose(empirical_covariance(x), np.eye(2), atol=0.02)
    with pytest.raises(UsageError):
        empirical_covariance([v])


def test_rate_regression_examples():
    k = np.array([10.0, 40.0, 160.0, 640.0])
    fit = rate_regression(k, 3 / np.sqrt(k))
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert rate_regression(k, np.full(4, 0.7)).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(UsageError):
        rate_regression([10, 20], [1, 1])
    with pytest.raises(UsageError):
        rate_regression([10, 20, 40], [1, 1, 1])


def test_band_and_bonferroni():
    assert bonferroni_z(9) == 4.0
    assert bonferroni_z(10**6) > 4.0
    x = np.random.default_rng(1).standard_normal((5000, 3))
    assert covariance_band(x, np.eye(3)).passed
    assert not covariance_band(x, 1.5 * np.eye(3)).passed


def test_skewness_se():
    g1, se = skewness_with_se(np.random.default_rng(2).standard_normal(10000))
    assert abs(g1) < 3 * se
    assert se == pytest.approx(np.sqrt(6 / 10000), rel=0.01)


def test_config_from_toml(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        'kind = "covariance"\nseed = 3\n\n[model]\nroot_system = "B"\nn = 3\nnu = 1.5\n\n'
        '[start]\nc = 1.0\n\n[time]\ntimes = [2.0]\n'
    )
    cfg = load_config(path, {"out": str(tmp_path / "out"), "n": 4})
    assert (cfg.kind, cfg.root_system, cfg.n, cfg.nu, cfg.seed) == ("covariance", "B", 4, 1.5, 3)
    assert cfg.times == [2.0]


@pytest.mark.parametrize("raw", [
    {"kind": "nope"},
    {"kind": "flow", "model": {"root_system": "B", "n": 2}},
    {"kind": "flow", "model": {"root_system": "A", "nu": 1.0}},
    {"kind": "flow", "start": {"mode": "explicit"}},
    {"kind": "flow", "start": {"mode": "explicit", "x": [1.0, 0.0]}},
    {"kind": "mc-clt", "ensemble": {"paths": 0}},
    {"kind": "flow", "colour": 1},
    {"kind": "flow", "model": {"spin": 1}},
    {"kind": "ou", "model": {"root_system": "A"}},
    {"kind": "b-phase", "model": {"root_system": "A"}},
])
def test_config_validation(raw):
    with pytest.raises(UsageError):
        config_from_mapping(raw)


def test_run_experiment_spectral_outputs(tmp_path):
    cfg = config_from_mapping({"kind": "spectral", "model": {"root_system": "A", "n": 6}},
                              {"out": str(tmp_path)})
    summary = run_experiment(cfg)
    assert summary.passed and summary.deltas["ladder"] <= 1e-8
    with open(tmp_path / "eigenvalues.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "eigenvalue", "ladder", "derived"]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx(range(1, 7), abs=1e-10)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert set(manifest["files"]) == {"eigenvalues.csv", "summary.json"}
    assert manifest["config"]["n"] == 6 and "numpy" in manifest["versions"] and manifest["target"]
    summary_json = json.loads((tmp_path / "summary.json").read_text())
    assert summary_json["schema_version"] == 1 and summary_json["passed"] is True


def test_d_spectral_reports_both_spectra(tmp_path):
    cfg = config_from_mapping({"kind": "spectral", "model": {"root_system": "D", "n": 3}},
                              {"out": str(tmp_path)})
    s = run_experiment(cfg)
    assert s.checks == {"ladder": False, "derived_spectrum": True}
    assert s.deltas["ladder"] == pytest.approx(2.0)


def test_covariance_experiment(tmp_path):
    cfg = config_from_mapping({"kind": "covariance", "model": {"root_system": "B", "n": 3, "nu": 1.5},
                               "time": {"times": [2.0]}}, {"out": str(tmp_path)})
    s = run_experiment(cfg)
    assert s.passed and s.deltas["closed_vs_lyapunov"] <= 1e-6


def test_flow_experiment_explicit_start(tmp_path):
    cfg = config_from_mapping({"kind": "flow", "model": {"root_system": "A", "n": 3},
                               "start": {"mode": "explicit", "x": [1.0, 0.2, -2.0]}}, {"out": str(tmp_path)})
    s = run_experiment(cfg)
    assert s.passed and "closed_form" not in s.checks


def test_mc_clt_small_run_is_reproducible(tmp_path):
    raw = {"kind": "mc-clt", "seed": 5, "model": {"root_system": "A", "n": 3, "k": 100},
           "time": {"points": 11}, "ensemble": {"paths": 300}}
    a = run_experiment(config_from_mapping(raw, {"out": str(tmp_path / "a")}))
    run_experiment(config_from_mapping(raw, {"out": str(tmp_path / "b"), "workers": 3}))
    assert a.residual_quantiles["0.9"][-1] >= a.residual_quantiles["0.5"][-1]
    for name in ("mean.csv", "covariance.csv", "residual.csv", "final_samples.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["spectral", "--rs", "A", "--n", "5", "--out", str(tmp_path / "ok")]) == 0
    assert main(["spectral", "--rs", "D", "--n", "3", "--out", str(tmp_path / "d")]) == 2
    assert main(["spectral", "--rs", "B", "--n", "3", "--out", str(tmp_path / "bad")]) == 1
    out = capsys.readouterr()
    assert "nu > 0" in out.err


def test_cli_run_with_config(tmp_path):
    path = tmp_path / "flow.toml"
    path.write_text('kind = "flow"\n[model]\nroot_system = "D"\nn = 4\n[time]\nhorizon = 10.0\n')
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--grid", "21"]) == 0
    rows = (tmp_path / "o" / "phi.csv").read_text().splitlines()
    assert len(rows) == 22
    assert main(["run", "--out", str(tmp_path / "x")]) == 1
