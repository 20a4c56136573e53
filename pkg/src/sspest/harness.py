"""End-to-end experiment driver.

A run draws a true field from the prior, steers the vehicle (straight
toward the transmitter or by receding-horizon planning), fuses the
measurements with the UKF and logs per-step metrics. Monte-Carlo sets
derive one seed per (run, stream) from the master seed, with the field
and noise streams independent of the sensor/steering configuration so
that configurations can be compared on paired realizations.
"""

from __future__ import annotations

import csv
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import estimator, planner, sensing
from .config import ExperimentConfig
from .estimator import GaussianBelief
from .field import SspField, gram_matrix
from .metrics import FieldMetrics, ssim
from .motion import AuvState, step as motion_step
from .propagation import RayFanModel
from .sensing import SensorConfig


def stream_rng(master_seed: int, run_id: int, stream: str) -> np.random.Generator:
    """Independent generator for one named stream of one run."""
    tag = zlib.crc32(stream.encode())
    return np.random.default_rng(np.random.SeedSequence([master_seed, run_id, tag]))


def draw_true_field(mean, cov, basis, region, rng) -> SspField:
    """Sample coefficients from the prior: theta = mean + chol(cov) z."""
    cov = estimator.symmetrize(np.asarray(cov, float))
    n = len(mean)
    if not cov.any():
        root = np.zeros((n, n))
    else:
        try:
            root = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            jit = 1e-9 * max(np.trace(cov), 1e-300) / n
            root = np.linalg.cholesky(cov + jit * np.eye(n))
    theta = np.asarray(mean, float) + root @ rng.standard_normal(n)
    return SspField(theta, basis, region)


@dataclass
class RunRecord:
    run_id: int
    theta_true: np.ndarray
    positions: list = dc_field(default_factory=list)     # (range, depth)
    pitches: list = dc_field(default_factory=list)
    steerings: list = dc_field(default_factory=list)
    measurements: list = dc_field(default_factory=list)
    means: list = dc_field(default_factory=list)
    cov_diags: list = dc_field(default_factory=list)
    rrmse: list = dc_field(default_factory=list)
    ssim: list = dc_field(default_factory=list)
    total_variance: list = dc_field(default_factory=list)
    plan_costs: list = dc_field(default_factory=list)
    plan_evals: list = dc_field(default_factory=list)
    flagged_steps: list = dc_field(default_factory=list)
    final_belief: GaussianBelief | None = None


def run_episode(cfg: ExperimentConfig, run_id: int = 0,
                gram: np.ndarray | None = None) -> RunRecord:
    """One full simulation: draw a truth, steer, measure, filter."""
    rng_field = stream_rng(cfg.seed, run_id, "field")
    rng_noise = stream_rng(cfg.seed, run_id, "noise")
    rng_plan = stream_rng(cfg.seed, run_id, "planner")

    mean0 = cfg.initial_mean()
    cov0 = cfg.initial_cov()
    true_field = draw_true_field(mean0, cov0, cfg.basis, cfg.region, rng_field)
    belief = GaussianBelief(mean0, cov0)
    prop = RayFanModel(cfg.env, cfg.ray)
    if gram is None:
        gram = gram_matrix(cfg.region, cfg.basis)
    fm = FieldMetrics(cfg.basis, cfg.region, cfg.metrics_raster, cfg.metrics_raster)
    true_raster = fm.raster(true_field.theta)
    rmse0 = fm.rmse(true_field.theta, mean0)
    q = cfg.q_matrix()

    state = AuvState(np.array([cfg.start_range, 0.0, cfg.start_depth]),
                     cfg.start_speed, np.pi, 0.0)   # facing the transmitter
    prev_steer = (0.0, 0.0)
    rec = RunRecord(run_id=run_id, theta_true=true_field.theta.copy())

    for k in range(1, cfg.steps + 1):
        if cfg.steering == "planned":
            r_plan = _plan_measurement_cov(cfg, belief, state, prop)
            provider = _jacobian_provider(cfg, belief, state, prop)
            result = planner.plan_step(
                state, belief, cfg.plan, cfg.limits, cfg.region, provider,
                r_plan, gram, rng_plan, prev_steer)
            action = result.action
            prev_steer = (action[1], action[2])
            rec.plan_costs.append(result.cost)
            rec.plan_evals.append(result.eval_count)
        else:
            action = (0.0, 0.0, 0.0)

        state, _ = motion_step(state, action, cfg.limits, cfg.region)
        p = state.range_depth
        y = sensing.measure(true_field, p, cfg.sensors, cfg.noise, prop,
                            rng_noise, k)

        belief = estimator.predict(belief, q)
        r_upd = _measurement_cov_at(cfg, belief, p, prop)
        meas_fn = _meas_fn(cfg, p, prop)
        belief, skipped = estimator.update(belief, y.vector(), r_upd,
                                           meas_fn, cfg.ukf)
        if skipped:
            rec.flagged_steps.append(k)

        rec.positions.append((float(p[0]), float(p[1])))
        rec.pitches.append(state.pitch)
        rec.steerings.append(action[2])
        rec.measurements.append(y)
        rec.means.append(belief.mean.copy())
        rec.cov_diags.append(np.diag(belief.cov).copy())
        rec.rrmse.append(fm.rmse(true_field.theta, belief.mean) / rmse0)
        rec.ssim.append(ssim(true_raster, fm.raster(belief.mean)))
        rec.total_variance.append(float(np.trace(belief.cov @ gram)))

    rec.final_belief = belief
    return rec


def _meas_fn(cfg, p, prop):
    def fn(theta):
        return sensing.h_joint(theta, p, cfg.sensors, cfg.basis,
                               cfg.region, prop)
    return fn


def _measurement_cov_at(cfg, belief, p, prop):
    tl_pred = 0.0
    if cfg.sensors.has_tl:
        field = SspField(belief.mean, cfg.basis, cfg.region)
        tl_pred = prop.transmission_loss(field, p)
    return sensing.measurement_covariance(cfg.sensors, cfg.noise, tl_pred)


def _plan_measurement_cov(cfg, belief, state, prop):
    """R frozen over the horizon, linearized at the current position."""
    return _measurement_cov_at(cfg, belief, state.range_depth, prop)


def _jacobian_provider(cfg, belief, state, prop):
    """Exact basis features for the linear CTD-only case; a bilinear
    Jacobian grid over the reachable box when TL is in the mix."""
    if not cfg.sensors.has_tl:
        return planner.CtdJacobianProvider(cfg.basis)
    box = planner.plan_box(state, cfg.plan, cfg.limits, cfg.region)
    return planner.build_gradient_grid(
        belief.mean, box, cfg.plan.gradient_grid_rows,
        cfg.plan.gradient_grid_cols, cfg.sensors, cfg.basis, cfg.region,
        prop, cfg.plan.fd_step)


# ---------------------------------------------------------------------------
# Monte Carlo

def _episode_worker(args):
    cfg, run_id = args
    try:
        rec = run_episode(cfg, run_id)
    except Exception as exc:               # noqa: BLE001 - logged, excluded
        return (run_id, None, repr(exc))
    # strip heavy per-step state for the aggregate path
    return (run_id, (rec.rrmse, rec.ssim, rec.total_variance,
                     len(rec.flagged_steps)), None)


def run_montecarlo(cfg: ExperimentConfig, out_dir) -> dict:
    """Run ``cfg.runs`` independent episodes and write aggregate tables.

    Writes ``metrics.csv`` (per run and step) and ``summary.csv`` (mean
    over runs per step). Failed runs are excluded and counted. Returns
    the summary as a dict of arrays.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, rid) for rid in range(cfg.runs)]
    raw = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            raw = list(pool.map(_episode_worker, jobs))
    else:
        raw = [_episode_worker(job) for job in jobs]
    failures = 0
    results = []
    for run_id, payload, err in sorted(raw, key=lambda r: r[0]):
        if payload is None:
            failures += 1
            print(f"run {run_id} failed: {err}")
        else:
            results.append((run_id, *payload))

    with (out_dir / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "step", "rrmse", "ssim", "total_variance"])
        for run_id, rrmse, ssim_vals, tv, _ in results:
            for k in range(len(rrmse)):
                w.writerow([run_id, k + 1, repr(rrmse[k]),
                            repr(ssim_vals[k]), repr(tv[k])])

    steps = cfg.steps
    rr = np.array([r[1] for r in results])
    ss = np.array([r[2] for r in results])
    tv = np.array([r[3] for r in results])
    summary = {
        "step": np.arange(1, steps + 1),
        "mean_rrmse": rr.mean(axis=0) if len(results) else np.zeros(steps),
        "mean_ssim": ss.mean(axis=0) if len(results) else np.zeros(steps),
        "mean_total_variance": tv.mean(axis=0) if len(results) else np.zeros(steps),
        "n_runs": len(results),
        "n_failed": failures,
    }
    with (out_dir / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "mean_rrmse", "mean_ssim", "mean_total_variance",
                    "n_runs"])
        for i in range(steps):
            w.writerow([i + 1, repr(float(summary["mean_rrmse"][i])),
                        repr(float(summary["mean_ssim"][i])),
                        repr(float(summary["mean_total_variance"][i])),
                        len(results)])
    return summary


def write_episode_csvs(cfg: ExperimentConfig, rec: RunRecord, out_dir):
    """Single-episode outputs: metrics, trajectory, belief and fields."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with (out_dir / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "step", "rrmse", "ssim", "total_variance"])
        for k in range(len(rec.rrmse)):
            w.writerow([rec.run_id, k + 1, repr(rec.rrmse[k]),
                        repr(rec.ssim[k]), repr(rec.total_variance[k])])

    with (out_dir / "trajectory.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "range", "depth", "pitch", "steering"])
        for k, (pos, pitch, steer) in enumerate(
                zip(rec.positions, rec.pitches, rec.steerings), start=1):
            w.writerow([k, repr(pos[0]), repr(pos[1]), repr(float(pitch)),
                        repr(float(steer))])

    with (out_dir / "belief.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        n = cfg.state_dim
        w.writerow(["step"] + [f"theta_{i}" for i in range(n)]
                   + [f"var_{i}" for i in range(n)])
        for k, (mean, var) in enumerate(zip(rec.means, rec.cov_diags), start=1):
            w.writerow([k] + [repr(float(v)) for v in mean]
                       + [repr(float(v)) for v in var])

    fm = FieldMetrics(cfg.basis, cfg.region, cfg.metrics_raster,
                      cfg.metrics_raster)
    _write_field_csv(out_dir / "field_true.csv", cfg, fm, rec.theta_true)
    final = rec.means[-1] if rec.means else cfg.initial_mean()
    _write_field_csv(out_dir / "field_est.csv", cfg, fm, final)

    with (out_dir / "measurements.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_index", "range", "depth", "ctd", "tl"])
        for y in rec.measurements:
            w.writerow([y.time_index, repr(y.position[0]), repr(y.position[1]),
                        "" if y.ctd is None else repr(y.ctd),
                        "" if y.tl is None else repr(y.tl)])


def _write_field_csv(path, cfg, fm: FieldMetrics, theta):
    raster = fm.raster(theta)
    n = cfg.metrics_raster
    dr = cfg.region.max_range / n
    dz = cfg.region.max_depth / n
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["range", "depth", "sound_speed"])
        for iz in range(n):
            for ir in range(n):
                w.writerow([repr((ir + 0.5) * dr), repr((iz + 0.5) * dz),
                            repr(float(raster[iz, ir]))])
