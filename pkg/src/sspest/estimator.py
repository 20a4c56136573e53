"""Unscented Kalman filter over the random-walk coefficient state.

The state transition is the identity plus process noise, so prediction
only inflates the covariance; sigma points are generated from the
predicted belief and pushed through the (possibly nonlinear) measurement
function.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of the field coefficients at one filter step."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float))
        object.__setattr__(self, "cov", np.asarray(self.cov, float))
        n = len(self.mean)
        if self.cov.shape != (n, n):
            raise ValueError("covariance shape does not match mean length")

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class UkfParams:
    """Unscented-transform scaling; kappa=None resolves to 3 - n."""

    alpha: float = 1.0
    beta: float = 2.0
    kappa: float | None = None

    def lam(self, n: int) -> float:
        kappa = (3.0 - n) if self.kappa is None else self.kappa
        lam = self.alpha ** 2 * (n + kappa) - n
        # keep the sigma-point spread bounded away from degeneracy
        return max(lam, (1e-3 - 1.0) * n)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def floor_psd(m: np.ndarray, rel_floor: float = 1e-8) -> np.ndarray:
    """Clip negative eigenvalues below -rel_floor * trace to zero."""
    m = symmetrize(m)
    w = np.linalg.eigvalsh(m)
    if w[0] >= -rel_floor * max(np.trace(m), 1e-300):
        if w[0] < 0.0:
            m = m + (-w[0]) * np.eye(len(m))
        return m
    w, v = np.linalg.eigh(m)
    return symmetrize((v * np.clip(w, 0.0, None)) @ v.T)


def predict(belief: GaussianBelief, q: np.ndarray) -> GaussianBelief:
    """Random-walk prediction: mean unchanged, covariance inflated by Q."""
    return GaussianBelief(belief.mean, symmetrize(belief.cov + q))


def sigma_points(belief: GaussianBelief, params: UkfParams):
    """2n+1 sigma points with mean and covariance weights.

    Returns (points (2n+1, n), w_mean, w_cov). Uses the lower-triangular
    Cholesky factor of (n + lambda) * cov; one shot of diagonal jitter is
    added on factorization failure.
    """
    n = belief.dim
    lam = params.lam(n)
    scaled = (n + lam) * symmetrize(belief.cov)
    try:
        root = np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError:
        jitter = 1e-9 * max(np.trace(belief.cov), 1e-300) / n
        root = np.linalg.cholesky(scaled + (n + lam) * jitter * np.eye(n))
    pts = np.empty((2 * n + 1, n))
    pts[0] = belief.mean
    pts[1:n + 1] = belief.mean + root.T
    pts[n + 1:] = belief.mean - root.T
    w_mean = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (n + lam)
    w_cov[0] = w_mean[0] + (1.0 - params.alpha ** 2 + params.beta)
    return pts, w_mean, w_cov


def update(belief: GaussianBelief, y: np.ndarray, r: np.ndarray,
           meas_fn, params: UkfParams):
    """Unscented measurement update.

    ``meas_fn(theta) -> m-vector`` is the measurement function at the
    current position; ``y`` the observed vector; ``r`` the measurement
    covariance. Returns (posterior, skipped): a numerically singular
    innovation covariance skips the update and returns the prior flagged.
    """
    y = np.asarray(y, float)
    pts, w_mean, w_cov = sigma_points(belief, params)
    preds = np.array([meas_fn(x) for x in pts])
    y_hat = w_mean @ preds
    dy = preds - y_hat
    dx = pts - belief.mean
    s = symmetrize((dy * w_cov[:, None]).T @ dy + r)
    c = (dx * w_cov[:, None]).T @ dy
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > 1e14:
        return belief, True
    gain = np.linalg.solve(s.T, c.T).T           # C S^-1
    mean = belief.mean + gain @ (y - y_hat)
    cov = floor_psd(belief.cov - gain @ s @ gain.T)
    return GaussianBelief(mean, cov), False


@dataclass
class FilterRun:
    beliefs: list
    flagged: list
    rrmse: list = dc_field(default_factory=list)
    total_variance: list = dc_field(default_factory=list)


def run_filter(initial: GaussianBelief, trajectory, measurements,
               r_for_step, meas_fn_at, q: np.ndarray,
               params: UkfParams | None = None,
               rmse_fn=None, gram: np.ndarray | None = None) -> FilterRun:
    """Fold predict + update over a trajectory.

    ``r_for_step(step_index, belief, p)`` supplies the measurement
    covariance; ``meas_fn_at(p)`` the measurement function at a position.
    ``rmse_fn(mean)`` (optional) and ``gram`` enable the per-step RRMSE
    and total-variance outputs.
    """
    params = params or UkfParams()
    run = FilterRun(beliefs=[initial], flagged=[])
    if rmse_fn is not None:
        rmse0 = rmse_fn(initial.mean)
    belief = initial
    for k, (p, y) in enumerate(zip(trajectory, measurements)):
        belief = predict(belief, q)
        r = r_for_step(k, belief, p)
        belief, skipped = update(belief, y.vector() if hasattr(y, "vector") else y,
                                 r, meas_fn_at(p), params)
        run.beliefs.append(belief)
        if skipped:
            run.flagged.append(k)
        if rmse_fn is not None:
            run.rrmse.append(rmse_fn(belief.mean) / rmse0)
        if gram is not None:
            run.total_variance.append(float(np.trace(belief.cov @ gram)))
    return run
