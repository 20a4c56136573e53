"""Sound-speed field modeled as a linear Gaussian basis-function expansion.

Conventions used throughout the package:

* A point ``p`` is ``(range, depth)`` in meters, depth positive downward.
* The region of interest is the axis-aligned box
  ``[0, max_range] x [0, max_depth]``.
* The coefficient vector ``theta`` has length ``K + 1``; entry 0 is the
  constant offset, entry ``k >= 1`` weights the k-th Gaussian bump.
* Basis ordering is depth-major: ``k - 1 = iz * cols + ir`` for depth row
  ``iz`` and range column ``ir``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Region:
    """Axis-aligned range-depth box, anchored at the origin."""

    max_range: float
    max_depth: float

    def __post_init__(self):
        if self.max_range <= 0 or self.max_depth <= 0:
            raise ValueError("region must have positive extent")

    @property
    def area(self) -> float:
        return self.max_range * self.max_depth

    def contains(self, p) -> bool:
        r, z = p
        return 0.0 <= r <= self.max_range and 0.0 <= z <= self.max_depth


@dataclass(frozen=True)
class BasisGrid:
    """Rectangular layout of Gaussian bumps over a range-depth region.

    ``range_centers`` and ``depth_centers`` hold the unique grid
    coordinates; ``lam_range``/``lam_depth`` are the diagonal entries of
    the inverse squared length-scale matrix (units 1/m^2).
    """

    range_centers: np.ndarray
    depth_centers: np.ndarray
    lam_range: float
    lam_depth: float

    def __post_init__(self):
        object.__setattr__(self, "range_centers", np.asarray(self.range_centers, float))
        object.__setattr__(self, "depth_centers", np.asarray(self.depth_centers, float))
        if self.lam_range <= 0 or self.lam_depth <= 0:
            raise ValueError("inverse length-scales must be strictly positive")
        for axis in (self.range_centers, self.depth_centers):
            if len(np.unique(axis)) != len(axis):
                raise ValueError("basis centers must be distinct")

    @classmethod
    def uniform(cls, rows: int, cols: int, region: Region,
                spread_range: float, spread_depth: float) -> "BasisGrid":
        """Rows x cols grid with centers at the midpoints of a uniform
        partition of the region. ``spread_*`` are the squared length
        scales (the diagonal of the inverse of the lambda matrix, m^2).
        """
        if rows < 1 or cols < 1:
            raise ValueError("grid must have at least one row and column")
        rc = (np.arange(cols) + 0.5) * region.max_range / cols
        zc = (np.arange(rows) + 0.5) * region.max_depth / rows
        return cls(rc, zc, 1.0 / spread_range, 1.0 / spread_depth)

    @property
    def rows(self) -> int:
        return len(self.depth_centers)

    @property
    def cols(self) -> int:
        return len(self.range_centers)

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def centers(self) -> np.ndarray:
        """All K centers as an (K, 2) array of (range, depth), depth-major."""
        rr, zz = np.meshgrid(self.range_centers, self.depth_centers)
        return np.column_stack([rr.ravel(), zz.ravel()])

    def basis_vector(self, p) -> np.ndarray:
        """Feature vector [1, exp(-||p - p_k||^2_lam), ...] of length K+1.

        Defined for any finite p; Gaussians are global, so evaluation
        outside the region is permitted.
        """
        return self.basis_matrix(np.asarray(p, float)[None, :])[0]

    def basis_matrix(self, points: np.ndarray) -> np.ndarray:
        """Feature vectors for an (N, 2) array of points, shape (N, K+1)."""
        points = np.asarray(points, float)
        er = np.exp(-self.lam_range * (points[:, 0:1] - self.range_centers) ** 2)
        ez = np.exp(-self.lam_depth * (points[:, 1:2] - self.depth_centers) ** 2)
        # depth-major outer product per point
        bumps = (ez[:, :, None] * er[:, None, :]).reshape(len(points), -1)
        return np.hstack([np.ones((len(points), 1)), bumps])


@dataclass(frozen=True)
class SspField:
    """Sound-speed field c(p) = phi(p)^T theta over a bounded region."""

    theta: np.ndarray
    basis: BasisGrid
    region: Region

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, float))
        if self.theta.shape != (self.basis.count + 1,):
            raise ValueError(
                f"theta length {self.theta.shape} does not match basis "
                f"count {self.basis.count} + 1"
            )

    def evaluate(self, p) -> float:
        """Sound speed at a point (m/s)."""
        return float(self.basis.basis_vector(p) @ self.theta)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return self.basis.basis_matrix(points) @ self.theta

    def gradient(self, p) -> np.ndarray:
        """Analytic spatial gradient (dc/drange, dc/ddepth) at p."""
        r, z = float(p[0]), float(p[1])
        b = self.basis
        dr = r - b.range_centers
        dz = z - b.depth_centers
        er = np.exp(-b.lam_range * dr ** 2)
        ez = np.exp(-b.lam_depth * dz ** 2)
        w = self.theta[1:].reshape(b.rows, b.cols)
        dcdr = float(np.sum(ez @ (w * (er * (-2.0 * b.lam_range * dr)))))
        dcdz = float(np.sum((ez * (-2.0 * b.lam_depth * dz)) @ (w * er)))
        return np.array([dcdr, dcdz])

    # propagation-model protocol
    def speed(self, r: float, z: float) -> float:
        return self.evaluate((r, z))

    def speed_gradient(self, r: float, z: float):
        g = self.gradient((r, z))
        return g[0], g[1]


def quadrature_nodes(region: Region, n_range: int, n_depth: int):
    """Midpoint tensor grid over the region.

    Returns (points (N, 2), cell_area) with N = n_range * n_depth,
    depth-major ordering.
    """
    r = (np.arange(n_range) + 0.5) * region.max_range / n_range
    z = (np.arange(n_depth) + 0.5) * region.max_depth / n_depth
    rr, zz = np.meshgrid(r, z)
    pts = np.column_stack([rr.ravel(), zz.ravel()])
    cell = (region.max_range / n_range) * (region.max_depth / n_depth)
    return pts, cell


def gram_matrix(region: Region, basis: BasisGrid,
                n_range: int = 200, n_depth: int = 200) -> np.ndarray:
    """Region integral of the basis outer product, G = int phi phi^T dp.

    Total field variance for a coefficient covariance S is trace(S @ G).
    Computed with tensor-product midpoint quadrature; G[0, 0] is the
    region area up to quadrature error.
    """
    if n_range < 50 or n_depth < 50:
        raise ValueError("quadrature grid must be at least 50x50")
    if region.area <= 0:
        raise ValueError("degenerate region")
    pts, cell = quadrature_nodes(region, n_range, n_depth)
    phi = basis.basis_matrix(pts)
    return (phi.T @ phi) * cell
