"""Field expansion, basis geometry, and Gram matrix."""

import numpy as np
import pytest

from sspest.field import BasisGrid, Region, SspField, gram_matrix, quadrature_nodes


def test_region_validation():
    with pytest.raises(ValueError):
        Region(0.0, 50.0)
    with pytest.raises(ValueError):
        Region(2000.0, -1.0)


def test_region_contains(region):
    assert region.contains((0.0, 0.0))
    assert region.contains((2000.0, 50.0))
    assert not region.contains((2000.1, 25.0))
    assert not region.contains((100.0, -0.1))
    assert region.area == 100000.0


def test_uniform_centers_at_cell_midpoints(region):
    b = BasisGrid.uniform(6, 6, region, (2000 / 6) ** 2, (50 / 6) ** 2)
    np.testing.assert_allclose(b.range_centers,
                               (np.arange(6) + 0.5) * 2000.0 / 6)
    np.testing.assert_allclose(b.depth_centers,
                               (np.arange(6) + 0.5) * 50.0 / 6)
    assert b.count == 36
    assert b.rows == b.cols == 6


def test_basis_vector_offset_and_center(basis):
    phi = basis.basis_vector((100.0, 10.0))
    assert phi.shape == (37,)
    assert phi[0] == 1.0
    # at a bump center the corresponding feature is exactly 1
    center = basis.centers[0]
    phi_c = basis.basis_vector(center)
    assert phi_c[1] == pytest.approx(1.0, abs=1e-15)
    assert np.all(phi_c[1:] <= 1.0 + 1e-15)


def test_basis_ordering_depth_major(basis):
    # k - 1 = iz * cols + ir: the bump peaked at (range col ir, depth row iz)
    iz, ir = 2, 4
    p = (basis.range_centers[ir], basis.depth_centers[iz])
    phi = basis.basis_vector(p)
    assert phi[1 + iz * basis.cols + ir] == pytest.approx(1.0, abs=1e-15)


def test_basis_matrix_matches_vector(basis):
    rng = np.random.default_rng(0)
    pts = rng.uniform([0, 0], [2000, 50], size=(17, 2))
    mat = basis.basis_matrix(pts)
    for i, p in enumerate(pts):
        np.testing.assert_allclose(mat[i], basis.basis_vector(p), rtol=0, atol=0)


def test_basis_vector_continuity(basis):
    p = np.array([700.0, 20.0])
    prev = np.inf
    for eps in (1.0, 0.1, 0.01, 0.001):
        diff = np.max(np.abs(basis.basis_vector(p + eps)
                             - basis.basis_vector(p)))
        assert diff < prev
        prev = diff
    assert prev < 1e-3


def test_evaluate_constant_field(basis, region, flat_theta):
    f = SspField(flat_theta, basis, region)
    for p in [(0.0, 0.0), (1234.5, 43.2), (2000.0, 50.0)]:
        assert f.evaluate(p) == 1500.0


def test_evaluate_zero_theta(basis, region):
    f = SspField(np.zeros(37), basis, region)
    assert f.evaluate((700.0, 20.0)) == 0.0


def test_evaluate_bump_at_center(basis, region, flat_theta):
    theta = flat_theta.copy()
    theta[1] = 5.0
    f = SspField(theta, basis, region)
    assert f.evaluate(basis.centers[0]) == pytest.approx(1505.0, abs=1e-12)


def test_evaluate_linear_in_theta(basis, region):
    rng = np.random.default_rng(1)
    t1 = rng.normal(size=37)
    t2 = rng.normal(size=37)
    a, b = 2.5, -0.75
    p = (321.0, 7.0)
    f = SspField(a * t1 + b * t2, basis, region)
    f1 = SspField(t1, basis, region)
    f2 = SspField(t2, basis, region)
    assert f.evaluate(p) == pytest.approx(a * f1.evaluate(p) + b * f2.evaluate(p),
                                          rel=1e-13)


def test_theta_length_checked(basis, region):
    with pytest.raises(ValueError):
        SspField(np.zeros(36), basis, region)


def test_gradient_matches_finite_differences(basis, region):
    rng = np.random.default_rng(2)
    theta = rng.normal(1500.0, 5.0, size=37)
    f = SspField(theta, basis, region)
    h = 1e-4
    for p in [(500.0, 10.0), (1666.0, 41.0), (10.0, 3.0)]:
        g = f.gradient(p)
        fd_r = (f.evaluate((p[0] + h, p[1])) - f.evaluate((p[0] - h, p[1]))) / (2 * h)
        fd_z = (f.evaluate((p[0], p[1] + h)) - f.evaluate((p[0], p[1] - h))) / (2 * h)
        np.testing.assert_allclose(g, [fd_r, fd_z], rtol=1e-6, atol=1e-9)


def test_quadrature_nodes_layout(region):
    pts, cell = quadrature_nodes(region, 4, 2)
    assert pts.shape == (8, 2)
    assert cell == pytest.approx(500.0 * 25.0)
    # depth-major: first row of nodes shares the shallowest depth
    np.testing.assert_allclose(pts[:4, 1], 12.5)
    np.testing.assert_allclose(pts[:4, 0], [250.0, 750.0, 1250.0, 1750.0])


def test_gram_offset_entry_is_area(basis, region):
    g = gram_matrix(region, basis)
    assert g[0, 0] == pytest.approx(region.area, rel=1e-3)


def test_gram_symmetric_psd(basis, region):
    g = gram_matrix(region, basis)
    assert np.max(np.abs(g - g.T)) == 0.0
    w = np.linalg.eigvalsh(g)
    assert w[0] >= -1e-9 * w[-1]


def test_gram_single_bump_vs_fine_grid_oracle(region):
    # one off-center Gaussian; oracle = independent 1000x1000 quadrature
    b = BasisGrid(np.array([700.0]), np.array([12.0]),
                  1.0 / (2000 / 6) ** 2, 1.0 / (50 / 6) ** 2)
    r = (np.arange(1000) + 0.5) * region.max_range / 1000
    z = (np.arange(1000) + 0.5) * region.max_depth / 1000
    rr, zz = np.meshgrid(r, z)
    bump = np.exp(-b.lam_range * (rr - 700.0) ** 2
                  - b.lam_depth * (zz - 12.0) ** 2)
    cell = (region.max_range / 1000) * (region.max_depth / 1000)
    oracle = np.sum(bump * bump) * cell
    g = gram_matrix(region, b, 200, 200)
    assert g[1, 1] == pytest.approx(oracle, rel=5e-3)


def test_gram_rejects_coarse_grid(basis, region):
    with pytest.raises(ValueError):
        gram_matrix(region, basis, 49, 200)


def test_trace_identity_with_pointwise_variance(basis, region):
    # trace(S G) = sum over nodes of phi^T S phi * cell (same grid)
    rng = np.random.default_rng(3)
    a = rng.normal(size=(37, 37))
    s = a @ a.T
    g = gram_matrix(region, basis, 100, 100)
    pts, cell = quadrature_nodes(region, 100, 100)
    phi = basis.basis_matrix(pts)
    pointwise = np.einsum("ij,jk,ik->i", phi, s, phi)
    assert np.trace(s @ g) == pytest.approx(np.sum(pointwise) * cell, rel=1e-9)
