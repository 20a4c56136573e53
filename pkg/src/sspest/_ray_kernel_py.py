"""Pure-Python fallback for the ray-fan tracing kernel.

Mirrors ``_ray_kernel.pyx`` step for step; the compiled module is
preferred at import time by :mod:`sspest.propagation` when available.

Angle convention: launch angle is measured from the horizontal, positive
toward the surface (decreasing depth). Rays advance monotonically in
range; a ray that turns vertical or backward is terminated.
"""

from __future__ import annotations

import numpy as np

# ray dies when its direction leaves the forward cone
_MIN_COS = 0.01


def rayleigh_coefficient(c1: float, c2: float, rho1: float, rho2: float,
                         grazing: float) -> complex:
    """Plane-wave reflection coefficient at a fluid-fluid interface.

    ``grazing`` is the grazing angle in radians (0 = parallel to the
    interface). Magnitude is 1 below the critical grazing angle for a
    fast bottom and tends to 1 as grazing -> 0.
    """
    kz1 = np.sin(grazing) / c1
    kr = np.cos(grazing) / c1
    kz2_sq = 1.0 / c2 ** 2 - kr * kr
    a = rho2 * kz1
    if kz2_sq >= 0.0:
        b = rho1 * np.sqrt(kz2_sq)
        return complex((a - b) / (a + b), 0.0)
    q = rho1 * np.sqrt(-kz2_sq)
    den = a * a + q * q
    return complex((a * a - q * q) / den, -2.0 * a * q / den)


def _field_eval(r, z, theta, rc, zc, lam_r, lam_z):
    """Sound speed and spatial gradient of the separable Gaussian basis."""
    dr = r - rc
    dz = z - zc
    er = np.exp(-lam_r * dr * dr)
    ez = np.exp(-lam_z * dz * dz)
    w = theta[1:].reshape(len(zc), len(rc))
    c = theta[0] + float(ez @ w @ er)
    dcdr = float(ez @ w @ (er * (-2.0 * lam_r * dr)))
    dcdz = float((ez * (-2.0 * lam_z * dz)) @ w @ er)
    return c, dcdr, dcdz


def trace_fan(theta, rc, zc, lam_r, lam_z,
              src_r, src_z, water_depth, max_range,
              angles, step, max_bounces,
              c_bottom, rho_bottom, rho_water, absorbing_bottom,
              rx_ranges):
    """Trace a fan of rays and record their states at receiver ranges.

    Returns arrays of shape (n_rays, n_rx): crossing depth ``z``, travel
    time ``t``, path length ``s``, cumulative boundary-reflection
    coefficient ``bre + 1j*bim``, bounce signature ``sig`` (surface
    count * 1024 + bottom count) and a ``valid`` mask.
    """
    theta = np.asarray(theta, float)
    rc = np.asarray(rc, float)
    zc = np.asarray(zc, float)
    angles = np.asarray(angles, float)
    rx = np.asarray(rx_ranges, float)
    n_rays, n_rx = len(angles), len(rx)

    out_z = np.full((n_rays, n_rx), np.nan)
    out_t = np.full((n_rays, n_rx), np.nan)
    out_s = np.full((n_rays, n_rx), np.nan)
    out_bre = np.zeros((n_rays, n_rx))
    out_bim = np.zeros((n_rays, n_rx))
    out_sig = np.zeros((n_rays, n_rx), np.int32)
    out_valid = np.zeros((n_rays, n_rx), np.uint8)

    s_max = 4.0 * max_range + 100.0
    max_steps = int(s_max / step) + 2

    for i in range(n_rays):
        r, z, phi, t, s = src_r, src_z, float(angles[i]), 0.0, 0.0
        bre, bim = 1.0, 0.0
        n_surf = n_bot = 0
        j = 0
        alive = True
        for _ in range(max_steps):
            if not alive or j >= n_rx or r >= max_range:
                break
            # RK4 over (r, z, phi, t) with arclength parameter
            c0, gr0, gz0 = _field_eval(r, z, theta, rc, zc, lam_r, lam_z)
            k1 = (np.cos(phi), -np.sin(phi),
                  (np.sin(phi) * gr0 + np.cos(phi) * gz0) / c0, 1.0 / c0)
            h2 = 0.5 * step
            c1, gr1, gz1 = _field_eval(r + h2 * k1[0], z + h2 * k1[1],
                                       theta, rc, zc, lam_r, lam_z)
            p1 = phi + h2 * k1[2]
            k2 = (np.cos(p1), -np.sin(p1),
                  (np.sin(p1) * gr1 + np.cos(p1) * gz1) / c1, 1.0 / c1)
            c2, gr2, gz2 = _field_eval(r + h2 * k2[0], z + h2 * k2[1],
                                       theta, rc, zc, lam_r, lam_z)
            p2 = phi + h2 * k2[2]
            k3 = (np.cos(p2), -np.sin(p2),
                  (np.sin(p2) * gr2 + np.cos(p2) * gz2) / c2, 1.0 / c2)
            c3, gr3, gz3 = _field_eval(r + step * k3[0], z + step * k3[1],
                                       theta, rc, zc, lam_r, lam_z)
            p3 = phi + step * k3[2]
            k4 = (np.cos(p3), -np.sin(p3),
                  (np.sin(p3) * gr3 + np.cos(p3) * gz3) / c3, 1.0 / c3)
            w = step / 6.0
            r2_ = r + w * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            z2_ = z + w * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            f2_ = phi + w * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            t2_ = t + w * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            s2_ = s + step

            if r2_ <= r or np.cos(f2_) < _MIN_COS:
                alive = False
                break

            # boundary fold: split the segment at the crossing so receiver
            # interpolation stays on the physical path
            if z2_ < 0.0 or z2_ > water_depth:
                bound = 0.0 if z2_ < 0.0 else water_depth
                u = (bound - z) / (z2_ - z)
                r_c = r + u * (r2_ - r)
                t_c = t + u * (t2_ - t)
                s_c = s + u * step
                # crossings on the pre-bounce sub-segment
                j = _record(rx, j, r, r_c, z, bound, t, t_c, s, s_c,
                            bre, bim, n_surf, n_bot,
                            out_z, out_t, out_s, out_bre, out_bim,
                            out_sig, out_valid, i)
                if n_surf + n_bot >= max_bounces:
                    alive = False
                    break
                if bound == 0.0:
                    coef = complex(-1.0, 0.0)
                    n_surf += 1
                else:
                    if absorbing_bottom:
                        alive = False
                        break
                    c_here, _, _ = _field_eval(r_c, bound, theta, rc, zc,
                                               lam_r, lam_z)
                    coef = rayleigh_coefficient(c_here, c_bottom, rho_water,
                                                rho_bottom, abs(f2_))
                    n_bot += 1
                prod = complex(bre, bim) * coef
                bre, bim = prod.real, prod.imag
                z2_ = 2.0 * bound - z2_
                f2_ = -f2_
                if z2_ < 0.0 or z2_ > water_depth:
                    alive = False      # steeper than one fold per step
                    break
                j = _record(rx, j, r_c, r2_, bound, z2_, t_c, t2_, s_c, s2_,
                            bre, bim, n_surf, n_bot,
                            out_z, out_t, out_s, out_bre, out_bim,
                            out_sig, out_valid, i)
            else:
                j = _record(rx, j, r, r2_, z, z2_, t, t2_, s, s2_,
                            bre, bim, n_surf, n_bot,
                            out_z, out_t, out_s, out_bre, out_bim,
                            out_sig, out_valid, i)

            r, z, phi, t, s = r2_, z2_, f2_, t2_, s2_

    return out_z, out_t, out_s, out_bre, out_bim, out_sig, out_valid


def _record(rx, j, r0, r1, z0, z1, t0, t1, s0, s1, bre, bim,
            n_surf, n_bot, out_z, out_t, out_s, out_bre, out_bim,
            out_sig, out_valid, i):
    """Record receiver-range crossings on one linear sub-segment."""
    while j < len(rx) and rx[j] <= r1:
        if rx[j] > r0:
            u = (rx[j] - r0) / (r1 - r0) if r1 > r0 else 0.0
            out_z[i, j] = z0 + u * (z1 - z0)
            out_t[i, j] = t0 + u * (t1 - t0)
            out_s[i, j] = s0 + u * (s1 - s0)
            out_bre[i, j] = bre
            out_bim[i, j] = bim
            out_sig[i, j] = n_surf * 1024 + n_bot
            out_valid[i, j] = 1
        j += 1
    return j
