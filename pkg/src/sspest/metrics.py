"""Field-level error and similarity metrics.

The RMSE is the integral form sqrt(int (c_est - c_true)^2 dp) over the
region (units m/s * m); no area normalization is applied since the
relative RMSE cancels the factor. SSIM uses a uniform sliding window
with the standard stabilizing constants scaled by the dynamic range of
the true raster.
"""

from __future__ import annotations

import numpy as np

from .field import BasisGrid, Region, quadrature_nodes


def rasterize(theta, basis: BasisGrid, region: Region,
              rows: int = 100, cols: int = 100) -> np.ndarray:
    """Field values on a midpoint grid; rows index depth, cols range."""
    pts, _ = quadrature_nodes(region, cols, rows)
    return (basis.basis_matrix(pts) @ np.asarray(theta, float)).reshape(rows, cols)


class FieldMetrics:
    """Precomputes the quadrature features so per-step metric evaluation
    in a long run is a single matrix-vector product."""

    def __init__(self, basis: BasisGrid, region: Region,
                 rows: int = 100, cols: int = 100):
        pts, self.cell = quadrature_nodes(region, cols, rows)
        self.phi = basis.basis_matrix(pts)
        self.rows, self.cols = rows, cols

    def rmse(self, theta_a, theta_b) -> float:
        d = self.phi @ (np.asarray(theta_a, float) - np.asarray(theta_b, float))
        return float(np.sqrt(np.sum(d * d) * self.cell))

    def raster(self, theta) -> np.ndarray:
        return (self.phi @ np.asarray(theta, float)).reshape(self.rows, self.cols)


def rmse(theta_true, theta_est, basis: BasisGrid, region: Region,
         rows: int = 100, cols: int = 100) -> float:
    """Integral-form field RMSE between two coefficient vectors."""
    return FieldMetrics(basis, region, rows, cols).rmse(theta_true, theta_est)


def rrmse(rmse_t: float, rmse_0: float) -> float:
    """RMSE at step t normalized by the initial-estimate RMSE."""
    if rmse_0 <= 0.0:
        raise ValueError("initial RMSE must be positive (degenerate draw)")
    return rmse_t / rmse_0


def _window_sums(x: np.ndarray, win: int, stride: int) -> np.ndarray:
    """Sums of x over all full win x win windows at the given stride,
    via an integral image (exact, no edge padding)."""
    c = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    c[1:, 1:] = np.cumsum(np.cumsum(x, axis=0), axis=1)
    i = np.arange(0, x.shape[0] - win + 1, stride)
    j = np.arange(0, x.shape[1] - win + 1, stride)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    return (c[ii + win, jj + win] - c[ii, jj + win]
            - c[ii + win, jj] + c[ii, jj])


def ssim(true_raster: np.ndarray, est_raster: np.ndarray,
         window: int = 7, stride: int = 1) -> float:
    """Mean structural similarity between two rasters, in [-1, 1].

    Uniform window; constants C1 = (0.01 D)^2, C2 = (0.03 D)^2 with D
    the dynamic range of the true raster, floored at 1 m/s so constant
    rasters stay well defined.
    """
    x = np.asarray(true_raster, float)
    y = np.asarray(est_raster, float)
    if x.shape != y.shape:
        raise ValueError("raster shapes differ")
    if min(x.shape) < window:
        raise ValueError("raster smaller than the SSIM window")
    d = max(float(x.max() - x.min()), 1.0)
    c1 = (0.01 * d) ** 2
    c2 = (0.03 * d) ** 2
    n = window * window
    mx = _window_sums(x, window, stride) / n
    my = _window_sums(y, window, stride) / n
    # population (biased) moments per window
    vx = _window_sums(x * x, window, stride) / n - mx * mx
    vy = _window_sums(y * y, window, stride) / n - my * my
    cxy = _window_sums(x * y, window, stride) / n - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def total_variance(cov: np.ndarray, gram: np.ndarray) -> float:
    """Region-integrated predictive field variance, trace(Sigma G)."""
    return float(np.trace(np.asarray(cov) @ np.asarray(gram)))
