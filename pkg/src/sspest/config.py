"""Experiment configuration: a strict-keyed YAML file.

The file mirrors the simulation and motion parameter tables key for
key; unknown keys anywhere are rejected so typos cannot silently fall
back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .estimator import UkfParams
from .field import BasisGrid, Region
from .motion import MotionLimits
from .planner import PlanConfig
from .propagation import Environment, RayFanConfig
from .sensing import NoiseSpec, SensorConfig

_SCHEMA = {
    "environment": {"water_depth", "transmission_range", "transmitter_range",
                    "transmitter_depth", "frequency", "bottom_sound_speed",
                    "bottom_density", "water_density"},
    "basis": {"rows", "columns", "spread_depth", "spread_range"},
    "noise": {"sigma_ctd", "sigma_tl", "tl_noise_domain"},
    "estimator": {"process_noise", "initial_offset", "initial_std",
                  "ut_alpha", "ut_beta", "ut_kappa"},
    "motion": {"sampling_period", "wheelbase", "max_steering_deg",
               "max_acceleration", "min_speed", "max_speed", "start_speed",
               "start_depth", "start_range"},
    "planner": {"horizon", "discount", "population", "generations",
                "mutation", "crossover", "grid_rows", "grid_cols",
                "boundary_penalty", "fd_step", "mode"},
    "ray_fan": {"num_rays", "span_deg", "step_length", "max_bounces"},
    "experiment": {"runs", "steps", "seed", "sensors", "steering",
                   "workers", "metrics_raster"},
}


@dataclass
class ExperimentConfig:
    env: Environment
    region: Region
    basis: BasisGrid
    noise: NoiseSpec
    ukf: UkfParams
    process_noise_var: float
    initial_offset: float
    initial_std: float
    limits: MotionLimits
    start_speed: float
    start_depth: float
    start_range: float
    plan: PlanConfig
    ray: RayFanConfig
    sensors: SensorConfig
    steering: str              # "straight" | "planned"
    runs: int
    steps: int
    seed: int
    workers: int = 1
    metrics_raster: int = 100

    def __post_init__(self):
        if self.steering not in ("straight", "planned"):
            raise ValueError("steering must be 'straight' or 'planned'")
        if self.runs < 1 or self.steps < 0:
            raise ValueError("runs must be >= 1 and steps >= 0")

    @property
    def state_dim(self) -> int:
        return self.basis.count + 1

    def initial_mean(self) -> np.ndarray:
        mean = np.zeros(self.state_dim)
        mean[0] = self.initial_offset
        return mean

    def initial_cov(self) -> np.ndarray:
        return self.initial_std ** 2 * np.eye(self.state_dim)

    def q_matrix(self) -> np.ndarray:
        return self.process_noise_var * np.eye(self.state_dim)


def _check_keys(data: dict, path: str = ""):
    unknown_sections = set(data) - set(_SCHEMA)
    if unknown_sections:
        raise ValueError(f"unknown config sections: {sorted(unknown_sections)}")
    for section, content in data.items():
        if content is None:
            continue
        extra = set(content) - _SCHEMA[section]
        if extra:
            raise ValueError(f"unknown keys in '{section}': {sorted(extra)}")


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse the YAML configuration; ``overrides`` patches the
    ``experiment`` section (CLI flags)."""
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must contain a mapping")
    _check_keys(data)

    def sec(name):
        return data.get(name) or {}

    e = sec("environment")
    env = Environment(
        water_depth=float(e.get("water_depth", 50.0)),
        max_range=float(e.get("transmission_range", 2000.0)),
        tx_range=float(e.get("transmitter_range", 0.0)),
        tx_depth=float(e.get("transmitter_depth", 25.0)),
        frequency=float(e.get("frequency", 5000.0)),
        bottom_speed=float(e.get("bottom_sound_speed", 5000.0)),
        bottom_density=float(e.get("bottom_density", 2500.0)),
        water_density=float(e.get("water_density", 1000.0)),
    )
    region = Region(env.max_range, env.water_depth)

    b = sec("basis")
    rows = int(b.get("rows", 6))
    cols = int(b.get("columns", 6))
    basis = BasisGrid.uniform(
        rows, cols, region,
        spread_range=float(b.get("spread_range", (region.max_range / cols) ** 2)),
        spread_depth=float(b.get("spread_depth", (region.max_depth / rows) ** 2)),
    )

    n = sec("noise")
    noise = NoiseSpec(
        sigma_ctd=float(n.get("sigma_ctd", 1e-2)),
        sigma_tl=float(n.get("sigma_tl", 1e-5)),
        tl_noise_domain=str(n.get("tl_noise_domain", "pressure")),
    )

    u = sec("estimator")
    kappa = u.get("ut_kappa", None)
    ukf = UkfParams(
        alpha=float(u.get("ut_alpha", 1.0)),
        beta=float(u.get("ut_beta", 2.0)),
        kappa=None if kappa is None else float(kappa),
    )

    m = sec("motion")
    limits = MotionLimits(
        delta_max=np.deg2rad(float(m.get("max_steering_deg", 10.0))),
        a_max=float(m.get("max_acceleration", 0.0)),
        v_min=float(m.get("min_speed", 2.0)),
        v_max=float(m.get("max_speed", 2.0)),
        wheelbase=float(m.get("wheelbase", 25.0)),
        dt=float(m.get("sampling_period", 2.5)),
    )

    p = sec("planner")
    plan = PlanConfig(
        horizon=int(p.get("horizon", 20)),
        discount=float(p.get("discount", 0.95)),
        de_population=int(p.get("population", 20)),
        de_generations=int(p.get("generations", 50)),
        de_mutation=float(p.get("mutation", 0.7)),
        de_crossover=float(p.get("crossover", 0.9)),
        gradient_grid_rows=int(p.get("grid_rows", 10)),
        gradient_grid_cols=int(p.get("grid_cols", 10)),
        boundary_penalty_scale=float(p.get("boundary_penalty", 1e3)),
        fd_step=float(p.get("fd_step", 0.1)),
        mode=str(p.get("mode", "planar")),
    )

    r = sec("ray_fan")
    ray = RayFanConfig(
        num_rays=int(r.get("num_rays", 181)),
        span_deg=float(r.get("span_deg", 60.0)),
        step_length=float(r.get("step_length", 1.0)),
        max_bounces=int(r.get("max_bounces", 20)),
    )

    x = dict(sec("experiment"))
    if overrides:
        x.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(
        env=env, region=region, basis=basis, noise=noise, ukf=ukf,
        process_noise_var=float(u.get("process_noise", 1e-3)),
        initial_offset=float(u.get("initial_offset", 1500.0)),
        initial_std=float(u.get("initial_std", 5.0)),
        limits=limits,
        start_speed=float(m.get("start_speed", 2.0)),
        start_depth=float(m.get("start_depth", 15.0)),
        start_range=float(m.get("start_range", 2000.0)),
        plan=plan, ray=ray,
        sensors=SensorConfig(str(x.get("sensors", "ctd")).lower()),
        steering=str(x.get("steering", "straight")).lower(),
        runs=int(x.get("runs", 50)),
        steps=int(x.get("steps", 100)),
        seed=int(x.get("seed", 1)),
        workers=int(x.get("workers", 1)),
        metrics_raster=int(x.get("metrics_raster", 100)),
    )
