"""Experiment driver, configuration, CLI, and plotting."""

import csv
import shutil
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

import sspest.harness as harness
from sspest.cli import main as cli_main
from sspest.config import load_config
from sspest.field import SspField
from sspest.harness import (draw_true_field, run_episode, run_montecarlo,
                            stream_rng, write_episode_csvs)
from sspest.plots import render, render_metrics

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "montecarlo.yaml"


def _fast(tmp_path, **overrides):
    return load_config(CONFIG, overrides)


# ---------------------------------------------------------------------------
# configuration

def test_config_defaults_match_reference_tables(tmp_path):
    cfg = _fast(tmp_path)
    assert cfg.env.water_depth == 50.0
    assert cfg.env.max_range == 2000.0
    assert cfg.env.tx_depth == 25.0
    assert cfg.env.frequency == 5000.0
    assert cfg.basis.count == 36
    assert cfg.state_dim == 37
    assert cfg.noise.sigma_ctd == 1e-2
    assert cfg.noise.sigma_tl == 1e-5
    assert cfg.limits.dt == 2.5
    assert cfg.limits.wheelbase == 25.0
    assert cfg.limits.delta_max == pytest.approx(np.deg2rad(10.0))
    assert cfg.limits.a_max == 0.0
    assert cfg.plan.horizon == 20
    assert cfg.plan.discount == 0.95
    assert cfg.plan.de_population == 20
    assert cfg.plan.de_generations == 50
    assert cfg.initial_offset == 1500.0
    assert cfg.initial_std == 5.0
    assert cfg.process_noise_var == 1e-3


def test_config_initial_matrices(tmp_path):
    cfg = _fast(tmp_path)
    mean = cfg.initial_mean()
    assert mean[0] == 1500.0 and np.all(mean[1:] == 0.0)
    np.testing.assert_array_equal(cfg.initial_cov(), 25.0 * np.eye(37))
    np.testing.assert_array_equal(cfg.q_matrix(), 1e-3 * np.eye(37))


def test_config_unknown_keys_rejected(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment:\n  runs: 3\n  stepz: 5\n")
    with pytest.raises(ValueError, match="stepz"):
        load_config(bad)
    bad2 = tmp_path / "bad2.yaml"
    bad2.write_text("experiments:\n  runs: 3\n")
    with pytest.raises(ValueError, match="experiments"):
        load_config(bad2)


def test_config_overrides(tmp_path):
    cfg = _fast(tmp_path, sensors="both", steering="planned", runs=3, steps=7)
    assert cfg.sensors.value == "both"
    assert cfg.steering == "planned"
    assert (cfg.runs, cfg.steps) == (3, 7)


def test_config_invalid_steering(tmp_path):
    with pytest.raises(ValueError):
        _fast(tmp_path, steering="sideways")


# ---------------------------------------------------------------------------
# seeding and field draws

def test_stream_rng_reproducible_and_independent():
    a = stream_rng(1, 0, "noise").standard_normal(5)
    b = stream_rng(1, 0, "noise").standard_normal(5)
    np.testing.assert_array_equal(a, b)
    c = stream_rng(1, 0, "field").standard_normal(5)
    d = stream_rng(1, 1, "noise").standard_normal(5)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_draw_true_field_zero_cov(basis, region):
    mean = np.full(37, 7.0)
    f = draw_true_field(mean, np.zeros((37, 37)), basis, region,
                        np.random.default_rng(0))
    assert isinstance(f, SspField)
    np.testing.assert_array_equal(f.theta, mean)


def test_draw_true_field_seeded(basis, region):
    mean = np.zeros(37)
    cov = 25.0 * np.eye(37)
    f1 = draw_true_field(mean, cov, basis, region, np.random.default_rng(5))
    f2 = draw_true_field(mean, cov, basis, region, np.random.default_rng(5))
    np.testing.assert_array_equal(f1.theta, f2.theta)


def test_draw_true_field_coefficient_std(basis, region):
    rng = np.random.default_rng(6)
    mean = np.zeros(37)
    cov = 25.0 * np.eye(37)
    draws = np.array([draw_true_field(mean, cov, basis, region, rng).theta
                      for _ in range(10000)])
    stds = draws.std(axis=0)
    assert np.all(stds >= 4.8) and np.all(stds <= 5.2)


# ---------------------------------------------------------------------------
# episodes

def test_straight_protocol_geometry(tmp_path):
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", steps=10)
    rec = run_episode(cfg, run_id=0)
    depths = [p[1] for p in rec.positions]
    ranges = [p[0] for p in rec.positions]
    np.testing.assert_allclose(depths, 15.0, atol=1e-9)
    np.testing.assert_allclose(np.diff(ranges), -5.0, atol=1e-9)
    assert ranges[0] == pytest.approx(1995.0)
    assert len(rec.rrmse) == len(rec.ssim) == len(rec.total_variance) == 10


def test_zero_steps_episode(tmp_path):
    cfg = _fast(tmp_path, steps=0)
    rec = run_episode(cfg, run_id=0)
    assert rec.positions == [] and rec.rrmse == []
    assert rec.final_belief is not None
    np.testing.assert_array_equal(rec.final_belief.mean, cfg.initial_mean())


def test_episode_deterministic(tmp_path):
    cfg = _fast(tmp_path, sensors="ctd", steering="planned", steps=3)
    a = run_episode(cfg, run_id=2)
    b = run_episode(cfg, run_id=2)
    np.testing.assert_array_equal(a.theta_true, b.theta_true)
    assert a.positions == b.positions
    assert a.rrmse == b.rrmse
    assert a.plan_costs == b.plan_costs
    for ma, mb in zip(a.means, b.means):
        np.testing.assert_array_equal(ma, mb)


def test_paired_truth_across_configurations(tmp_path):
    a = run_episode(_fast(tmp_path, sensors="ctd", steering="straight",
                          steps=2), run_id=4)
    b = run_episode(_fast(tmp_path, sensors="both", steering="straight",
                          steps=2), run_id=4)
    np.testing.assert_array_equal(a.theta_true, b.theta_true)
    # identical CTD noise stream: CTD channel matches exactly
    for ya, yb in zip(a.measurements, b.measurements):
        assert ya.ctd == yb.ctd


def test_episode_rrmse_improves_with_ctd(tmp_path):
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", steps=30)
    rec = run_episode(cfg, run_id=1)
    assert rec.rrmse[-1] < 1.0
    assert np.all(np.isfinite(rec.rrmse))


# ---------------------------------------------------------------------------
# Monte Carlo aggregation

def test_montecarlo_single_run_aggregate(tmp_path):
    out = tmp_path / "mc1"
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", runs=1, steps=4)
    summary = run_montecarlo(cfg, out)
    rec = run_episode(cfg, run_id=0)
    np.testing.assert_allclose(summary["mean_rrmse"], rec.rrmse, rtol=0, atol=0)
    np.testing.assert_allclose(summary["mean_ssim"], rec.ssim, rtol=0, atol=0)
    assert summary["n_runs"] == 1 and summary["n_failed"] == 0


def test_montecarlo_mean_of_means(tmp_path):
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", runs=4, steps=3)
    s_all = run_montecarlo(cfg, tmp_path / "all")
    recs = [run_episode(cfg, run_id=i) for i in range(4)]
    manual = np.mean([r.rrmse for r in recs], axis=0)
    np.testing.assert_allclose(s_all["mean_rrmse"], manual, rtol=1e-12)


def test_montecarlo_csv_schema(tmp_path):
    out = tmp_path / "mc2"
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", runs=2, steps=3)
    run_montecarlo(cfg, out)
    with (out / "metrics.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["run_id", "step", "rrmse", "ssim", "total_variance"]
    assert len(rows) == 1 + 2 * 3
    with (out / "summary.csv").open() as fh:
        srows = list(csv.reader(fh))
    assert srows[0] == ["step", "mean_rrmse", "mean_ssim",
                        "mean_total_variance", "n_runs"]
    assert len(srows) == 1 + 3


def test_montecarlo_excludes_failed_runs(tmp_path, monkeypatch):
    real = harness.run_episode

    def flaky(cfg, run_id=0, gram=None):
        if run_id == 1:
            raise RuntimeError("synthetic failure")
        return real(cfg, run_id, gram)

    monkeypatch.setattr(harness, "run_episode", flaky)
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", runs=3, steps=2)
    summary = run_montecarlo(cfg, tmp_path / "mcf")
    assert summary["n_runs"] == 2
    assert summary["n_failed"] == 1


def test_montecarlo_byte_identical_rerun(tmp_path):
    cfg = _fast(tmp_path, sensors="ctd", steering="straight", runs=2, steps=3)
    run_montecarlo(cfg, tmp_path / "a")
    run_montecarlo(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "metrics.csv").read_bytes() \
        == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_bytes() \
        == (tmp_path / "b" / "summary.csv").read_bytes()


# ---------------------------------------------------------------------------
# episode CSV outputs and plots

@pytest.fixture(scope="module")
def episode_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("episode")
    cfg = load_config(CONFIG, {"sensors": "both", "steering": "straight",
                               "steps": 4})
    rec = run_episode(cfg, run_id=0)
    write_episode_csvs(cfg, rec, tmp)
    return tmp


def test_episode_csv_files(episode_dir):
    for name in ("metrics.csv", "trajectory.csv", "belief.csv",
                 "field_true.csv", "field_est.csv", "measurements.csv"):
        assert (episode_dir / name).exists(), name
    with (episode_dir / "trajectory.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "range", "depth", "pitch", "steering"]
    assert len(rows) == 1 + 4
    with (episode_dir / "measurements.csv").open() as fh:
        mrows = list(csv.reader(fh))
    assert mrows[0] == ["time_index", "range", "depth", "ctd", "tl"]
    assert all(r[3] != "" and r[4] != "" for r in mrows[1:])


def test_render_plots(episode_dir, tmp_path):
    out = tmp_path / "plots"
    written = render(episode_dir, out)
    names = {p.name for p in written}
    assert {"rrmse_vs_step.svg", "ssim_vs_step.svg",
            "field_true.svg", "field_est.svg"} <= names
    for p in written:
        assert p.stat().st_size > 0


def test_render_deterministic_bytes(episode_dir, tmp_path):
    out1, out2 = tmp_path / "p1", tmp_path / "p2"
    render(episode_dir, out1)
    render(episode_dir, out2)
    for name in ("rrmse_vs_step.svg", "field_true.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_render_missing_table_error_names_file(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(FileNotFoundError, match="metrics.csv"):
        render_metrics(empty, tmp_path / "out")


def test_render_missing_column_error(tmp_path):
    src = tmp_path / "partial"
    src.mkdir()
    (src / "metrics.csv").write_text("step,rrmse\n1,0.5\n")
    with pytest.raises(ValueError, match="ssim"):
        render_metrics(src, tmp_path / "out")


# ---------------------------------------------------------------------------
# CLI

def test_cli_simulate_and_plot(tmp_path):
    runner = CliRunner()
    out = tmp_path / "sim"
    res = runner.invoke(cli_main, [
        "simulate", "--config", str(CONFIG), "--sensors", "ctd",
        "--steering", "straight", "--steps", "3", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "metrics.csv").exists()
    plots = tmp_path / "sim_plots"
    res2 = runner.invoke(cli_main, ["plot", "--in", str(out),
                                    "--out", str(plots)])
    assert res2.exit_code == 0, res2.output
    assert (plots / "rrmse_vs_step.svg").exists()


def test_cli_montecarlo(tmp_path):
    runner = CliRunner()
    out = tmp_path / "mc"
    res = runner.invoke(cli_main, [
        "montecarlo", "--config", str(CONFIG), "--sensors", "ctd",
        "--steering", "straight", "--runs", "2", "--steps", "2",
        "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "2 runs" in res.output
    assert (out / "summary.csv").exists()


def test_cli_bad_config_exits_nonzero(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense_section:\n  a: 1\n")
    runner = CliRunner()
    res = runner.invoke(cli_main, ["simulate", "--config", str(bad),
                                   "--out", str(tmp_path / "x")])
    assert res.exit_code == 1
    assert "error:" in res.output
