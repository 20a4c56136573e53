"""Receding-horizon steering selection by differential evolution.

Each planning step minimizes the discounted predicted total field
variance over the free Bezier steering control points. The predicted
covariance along a candidate path comes from the summed Fisher
information of the future measurements; the per-step cost is evaluated
with rank-m covariance downdates, which is algebraically identical to
inverting the information sum but far cheaper inside the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .estimator import GaussianBelief, floor_psd, symmetrize
from .field import BasisGrid, Region, SspField
from .motion import AuvState, BezierSteering, MotionLimits, rollout_batch
from .sensing import SensorConfig


@dataclass(frozen=True)
class PlanConfig:
    horizon: int = 20
    discount: float = 0.95
    de_population: int = 20
    de_generations: int = 50
    de_mutation: float = 0.7
    de_crossover: float = 0.9
    gradient_grid_rows: int = 10
    gradient_grid_cols: int = 10
    boundary_penalty_scale: float = 1e3   # x prior total variance, per violation
    fd_step: float = 0.1                  # m/s, TL Jacobian perturbation
    mode: str = "planar"                  # "planar" (pitch only) or "full"

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        if self.de_population < 4:
            raise ValueError("DE population must be at least 4")
        if self.mode not in ("planar", "full"):
            raise ValueError("mode must be 'planar' or 'full'")


class CtdJacobianProvider:
    """Exact measurement Jacobian for the linear CTD-only channel."""

    def __init__(self, basis: BasisGrid):
        self.basis = basis

    def jacobian(self, p) -> np.ndarray:
        return self.basis.basis_vector(p)[:, None]

    def jacobian_many(self, points) -> np.ndarray:
        return self.basis.basis_matrix(points)[:, :, None]


def measurement_jacobian(theta, p, sensors: SensorConfig, basis: BasisGrid,
                         region: Region, prop, fd_step: float = 0.1) -> np.ndarray:
    """d h / d theta at one position, shape (K+1, channels).

    The CTD column is the basis vector (that channel is linear); the TL
    column uses central finite differences with the given per-coefficient
    step. Non-finite TL perturbations zero the affected entry.
    """
    jac = _jacobian_at_points(np.asarray(theta, float),
                              np.asarray(p, float)[None, :],
                              sensors, basis, region, prop, fd_step)
    return jac[0]


def _jacobian_at_points(theta, points, sensors, basis, region, prop, fd_step):
    """Jacobians at N points, shape (N, K+1, m); finite differences are
    batched so each perturbed coefficient costs one fan trace."""
    n = len(theta)
    cols = []
    if sensors.has_ctd:
        cols.append(basis.basis_matrix(points)[:, :, None])
    if sensors.has_tl:
        tl_col = np.empty((len(points), n))
        for k in range(n):
            dtheta = np.zeros(n)
            dtheta[k] = fd_step
            hi = prop.transmission_loss_many(SspField(theta + dtheta, basis, region), points)
            lo = prop.transmission_loss_many(SspField(theta - dtheta, basis, region), points)
            tl_col[:, k] = (hi - lo) / (2.0 * fd_step)
        bad = ~np.isfinite(tl_col)
        if bad.any():
            tl_col[bad] = 0.0
        cols.append(tl_col[:, :, None])
    return np.concatenate(cols, axis=2)


class GradientGrid:
    """Bilinear interpolation of measurement Jacobians over a box.

    Node Jacobians are computed once per planning step; queries outside
    the box are clamped to its edge (and counted in ``clamped``).
    """

    def __init__(self, r_nodes, z_nodes, jacobians):
        self.r_nodes = np.asarray(r_nodes, float)
        self.z_nodes = np.asarray(z_nodes, float)
        self.jacobians = np.asarray(jacobians, float)  # (nz, nr, n, m)
        self.clamped = 0

    def jacobian(self, p) -> np.ndarray:
        return self.jacobian_many(np.asarray(p, float)[None, :])[0]

    def jacobian_many(self, points) -> np.ndarray:
        points = np.asarray(points, float)
        rn, zn = self.r_nodes, self.z_nodes
        r = points[:, 0]
        z = points[:, 1]
        out_of_box = ((r < rn[0]) | (r > rn[-1]) | (z < zn[0]) | (z > zn[-1]))
        self.clamped += int(out_of_box.sum())
        r = np.clip(r, rn[0], rn[-1])
        z = np.clip(z, zn[0], zn[-1])
        ir = np.clip(np.searchsorted(rn, r) - 1, 0, len(rn) - 2)
        iz = np.clip(np.searchsorted(zn, z) - 1, 0, len(zn) - 2)
        ur = (r - rn[ir]) / (rn[ir + 1] - rn[ir])
        uz = (z - zn[iz]) / (zn[iz + 1] - zn[iz])
        ur = ur[:, None, None]
        uz = uz[:, None, None]
        j = self.jacobians
        return ((1 - uz) * (1 - ur) * j[iz, ir]
                + (1 - uz) * ur * j[iz, ir + 1]
                + uz * (1 - ur) * j[iz + 1, ir]
                + uz * ur * j[iz + 1, ir + 1])


def build_gradient_grid(theta, box, rows, cols, sensors: SensorConfig,
                        basis: BasisGrid, region: Region, prop,
                        fd_step: float = 0.1) -> GradientGrid:
    """Jacobian grid over ``box`` = (r_min, r_max, z_min, z_max)."""
    r_min, r_max, z_min, z_max = box
    if not (region.contains((r_min, z_min)) and region.contains((r_max, z_max))):
        raise ValueError("gradient grid box must lie inside the region")
    r_nodes = np.linspace(r_min, r_max, cols)
    z_nodes = np.linspace(z_min, z_max, rows)
    rr, zz = np.meshgrid(r_nodes, z_nodes)
    pts = np.column_stack([rr.ravel(), zz.ravel()])
    jac = _jacobian_at_points(np.asarray(theta, float), pts, sensors,
                              basis, region, prop, fd_step)
    n, m = jac.shape[1:]
    return GradientGrid(r_nodes, z_nodes, jac.reshape(rows, cols, n, m))


def predict_covariance(prior: GaussianBelief, positions, provider,
                       r_cov: np.ndarray) -> np.ndarray:
    """Covariance after the future measurements via summed information.

    inv(Sigma') = inv(Sigma) + sum_j H(p_j) inv(R) H(p_j)^T, returned
    symmetrized PSD. Ill-conditioned priors get a trace-scaled jitter.
    """
    n = prior.dim
    eye = np.eye(n)
    cov = symmetrize(prior.cov)
    try:
        info = np.linalg.solve(cov, eye)
    except np.linalg.LinAlgError:
        jit = 1e-9 * max(np.trace(cov), 1e-300)
        info = np.linalg.solve(cov + jit * eye, eye)
    r_inv = np.linalg.inv(r_cov)
    for p in positions:
        h = provider.jacobian(p)
        info = info + h @ r_inv @ h.T
    info = symmetrize(info)
    try:
        out = np.linalg.solve(info, eye)
    except np.linalg.LinAlgError:
        jit = 1e-9 * max(np.trace(info), 1e-300)
        out = np.linalg.solve(info + jit * eye, eye)
    return floor_psd(out)


def _batch_inv_small(s: np.ndarray) -> np.ndarray:
    """Inverse of a (B, m, m) stack for m in {1, 2}."""
    m = s.shape[-1]
    if m == 1:
        return 1.0 / s
    if m == 2:
        det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
        out = np.empty_like(s)
        out[:, 0, 0] = s[:, 1, 1]
        out[:, 1, 1] = s[:, 0, 0]
        out[:, 0, 1] = -s[:, 0, 1]
        out[:, 1, 0] = -s[:, 1, 0]
        return out / det[:, None, None]
    return np.linalg.inv(s)


def objective_batch(positions: np.ndarray, violations: np.ndarray,
                    prior: GaussianBelief, provider, r_cov: np.ndarray,
                    gram: np.ndarray, discount: float,
                    boundary_penalty_scale: float) -> np.ndarray:
    """Discounted predicted total variance for (B, T, 2) candidate paths.

    Sequential rank-m covariance downdates (Woodbury form of the Fisher
    information sum) track trace(Sigma_i G) per step; violations add
    ``scale * prior total variance`` each.
    """
    b, t_steps, _ = positions.shape
    h_all = provider.jacobian_many(positions.reshape(-1, 2))
    n, m = h_all.shape[1:]
    h_all = h_all.reshape(b, t_steps, n, m)
    sig = np.broadcast_to(symmetrize(prior.cov), (b, n, n)).copy()
    t_g0 = float(np.trace(prior.cov @ gram))
    t_g = np.full(b, t_g0)
    cost = np.zeros(b)
    for i in range(t_steps):
        h = h_all[:, i]
        u = sig @ h                                        # (B, n, m)
        ut = u.transpose(0, 2, 1)
        s = r_cov + h.transpose(0, 2, 1) @ u
        s_inv = _batch_inv_small(s)
        m_small = ut @ (gram @ u)
        t_g = t_g - (s_inv * m_small.transpose(0, 2, 1)).sum(axis=(1, 2))
        sig = sig - (u @ s_inv) @ ut
        cost += discount ** (i + 1) * t_g
    return cost + boundary_penalty_scale * t_g0 * violations


def objective(positions, violations: int, prior: GaussianBelief, provider,
              r_cov, gram, discount: float,
              boundary_penalty_scale: float = 1e3) -> float:
    """Cost of a single candidate path (see ``objective_batch``)."""
    return float(objective_batch(np.asarray(positions, float)[None],
                                 np.array([violations]), prior, provider,
                                 r_cov, gram, discount,
                                 boundary_penalty_scale)[0])


@dataclass
class PlanResult:
    action: tuple                  # (acceleration, yaw steer, pitch steer)
    steering: BezierSteering
    cost: float
    eval_count: int
    best_positions: np.ndarray
    best_history: list = dc_field(default_factory=list)


def plan_step(state: AuvState, prior: GaussianBelief, config: PlanConfig,
              limits: MotionLimits, region: Region, provider,
              r_cov: np.ndarray, gram: np.ndarray,
              rng: np.random.Generator,
              prev_steering: tuple[float, float] = (0.0, 0.0)) -> PlanResult:
    """One receding-horizon planning step.

    Runs DE/rand/1/bin over the free Bezier control points (2 scalars in
    planar mode, 4 in full mode) with the zero-steering candidate seeded
    into the initial population, and returns the first action of the
    best rollout. Deterministic for a fixed rng state.
    """
    dims = 2 if config.mode == "planar" else 4
    pop_n = config.de_population
    bound = limits.delta_max

    def decode(genomes: np.ndarray) -> list[BezierSteering]:
        out = []
        for g in genomes:
            if config.mode == "planar":
                b_yaw = np.array([prev_steering[0], 0.0, 0.0])
                b_pitch = np.array([prev_steering[1], g[0], g[1]])
            else:
                b_yaw = np.array([prev_steering[0], g[0], g[1]])
                b_pitch = np.array([prev_steering[1], g[2], g[3]])
            out.append(BezierSteering(b_yaw, b_pitch, config.horizon))
        return out

    def evaluate(genomes: np.ndarray) -> np.ndarray:
        positions, violations = rollout_batch(state, decode(genomes),
                                              limits, region)
        return objective_batch(positions, violations, prior, provider,
                               r_cov, gram, config.discount,
                               config.boundary_penalty_scale)

    pop = rng.uniform(-bound, bound, size=(pop_n, dims))
    pop[0] = 0.0                       # straight-line baseline candidate
    cost = evaluate(pop)
    evals = pop_n

    for _ in range(config.de_generations):
        idx = np.arange(pop_n)
        r1 = np.empty(pop_n, int)
        r2 = np.empty(pop_n, int)
        r3 = np.empty(pop_n, int)
        for i in range(pop_n):
            choices = rng.permutation(np.delete(idx, i))[:3]
            r1[i], r2[i], r3[i] = choices
        mutant = pop[r1] + config.de_mutation * (pop[r2] - pop[r3])
        mutant = np.clip(mutant, -bound, bound)
        cross = rng.random((pop_n, dims)) < config.de_crossover
        cross[idx, rng.integers(0, dims, pop_n)] = True
        trial = np.where(cross, mutant, pop)
        trial_cost = evaluate(trial)
        evals += pop_n
        improved = trial_cost <= cost
        pop[improved] = trial[improved]
        cost[improved] = trial_cost[improved]

    best = int(np.argmin(cost))
    steering = decode(pop[best:best + 1])[0]
    positions, _ = rollout_batch(state, [steering], limits, region)
    d_yaw, d_pitch = steering.at(1.0 / config.horizon)
    return PlanResult((0.0, d_yaw, d_pitch), steering, float(cost[best]),
                      evals, positions[0])


def plan_box(state: AuvState, config: PlanConfig, limits: MotionLimits,
             region: Region, pad: float = 10.0):
    """Bounding box of the maximal-turn rollout envelope, padded and
    clipped to the region; the gradient grid spans this box."""
    extremes = []
    for sy in (-1.0, 0.0, 1.0):
        for sp in (-1.0, 0.0, 1.0):
            b = limits.delta_max
            steer = BezierSteering(
                np.array([state.yaw * 0.0, sy * b, sy * b]),
                np.array([0.0, sp * b, sp * b]), config.horizon)
            extremes.append(steer)
    positions, _ = rollout_batch(state, extremes, limits, region)
    r_all = positions[:, :, 0]
    z_all = positions[:, :, 1]
    r0 = np.clip(min(r_all.min(), state.position[0]) - pad, 0.0, region.max_range)
    r1 = np.clip(max(r_all.max(), state.position[0]) + pad, 0.0, region.max_range)
    z0 = np.clip(min(z_all.min(), state.position[2]) - pad, 0.0, region.max_depth)
    z1 = np.clip(max(z_all.max(), state.position[2]) + pad, 0.0, region.max_depth)
    return float(r0), float(r1), float(z0), float(z1)
