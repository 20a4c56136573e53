# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray-fan tracing kernel.

Behaviorally identical to ``_ray_kernel_py.trace_fan``; see that module
for the contract and conventions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, sqrt, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double _MIN_COS = 0.01


cdef struct Field:
    double theta0
    double* w          # rows x cols weights, depth-major
    double* rc
    double* zc
    int rows
    int cols
    double lam_r
    double lam_z
    double* er         # scratch, cols
    double* der        # scratch, cols
    double* ez         # scratch, rows


cdef inline void field_eval(Field* f, double r, double z,
                            double* c, double* dcdr, double* dcdz) noexcept nogil:
    cdef int ir, iz
    cdef double dr, dz, e, sz, szr, cz, gr, gz, wv, ezv
    for ir in range(f.cols):
        dr = r - f.rc[ir]
        e = exp(-f.lam_r * dr * dr)
        f.er[ir] = e
        f.der[ir] = -2.0 * f.lam_r * dr * e
    cz = 0.0
    gr = 0.0
    gz = 0.0
    for iz in range(f.rows):
        dz = z - f.zc[iz]
        ezv = exp(-f.lam_z * dz * dz)
        sz = 0.0
        szr = 0.0
        for ir in range(f.cols):
            wv = f.w[iz * f.cols + ir]
            sz += wv * f.er[ir]
            szr += wv * f.der[ir]
        cz += ezv * sz
        gr += ezv * szr
        gz += (-2.0 * f.lam_z * dz * ezv) * sz
    c[0] = f.theta0 + cz
    dcdr[0] = gr
    dcdz[0] = gz


cdef inline void rayleigh(double c1, double c2, double rho1, double rho2,
                          double grazing, double* re, double* im) noexcept nogil:
    cdef double kz1 = sin(grazing) / c1
    cdef double kr = cos(grazing) / c1
    cdef double kz2_sq = 1.0 / (c2 * c2) - kr * kr
    cdef double a = rho2 * kz1
    cdef double b, q, den
    if kz2_sq >= 0.0:
        b = rho1 * sqrt(kz2_sq)
        re[0] = (a - b) / (a + b)
        im[0] = 0.0
    else:
        q = rho1 * sqrt(-kz2_sq)
        den = a * a + q * q
        re[0] = (a * a - q * q) / den
        im[0] = -2.0 * a * q / den


cdef inline int record(double[::1] rx, int j, int n_rx,
                       double r0, double r1, double z0, double z1,
                       double t0, double t1, double s0, double s1,
                       double bre, double bim, int n_surf, int n_bot,
                       double[:, ::1] out_z, double[:, ::1] out_t,
                       double[:, ::1] out_s, double[:, ::1] out_bre,
                       double[:, ::1] out_bim, int[:, ::1] out_sig,
                       unsigned char[:, ::1] out_valid, int i) noexcept nogil:
    cdef double u
    while j < n_rx and rx[j] <= r1:
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


def trace_fan(theta, rc, zc, double lam_r, double lam_z,
              double src_r, double src_z, double water_depth, double max_range,
              angles, double step, int max_bounces,
              double c_bottom, double rho_bottom, double rho_water,
              int absorbing_bottom, rx_ranges):
    theta = np.ascontiguousarray(theta, np.float64)
    rc = np.ascontiguousarray(rc, np.float64)
    zc = np.ascontiguousarray(zc, np.float64)
    angles = np.ascontiguousarray(angles, np.float64)
    rx = np.ascontiguousarray(rx_ranges, np.float64)

    cdef double[::1] theta_v = theta
    cdef double[::1] rc_v = rc
    cdef double[::1] zc_v = zc
    cdef double[::1] ang_v = angles
    cdef double[::1] rx_v = rx
    cdef int n_rays = ang_v.shape[0]
    cdef int n_rx = rx_v.shape[0]

    out_z_a = np.full((n_rays, n_rx), np.nan)
    out_t_a = np.full((n_rays, n_rx), np.nan)
    out_s_a = np.full((n_rays, n_rx), np.nan)
    out_bre_a = np.zeros((n_rays, n_rx))
    out_bim_a = np.zeros((n_rays, n_rx))
    out_sig_a = np.zeros((n_rays, n_rx), np.int32)
    out_valid_a = np.zeros((n_rays, n_rx), np.uint8)
    cdef double[:, ::1] out_z = out_z_a
    cdef double[:, ::1] out_t = out_t_a
    cdef double[:, ::1] out_s = out_s_a
    cdef double[:, ::1] out_bre = out_bre_a
    cdef double[:, ::1] out_bim = out_bim_a
    cdef int[:, ::1] out_sig = out_sig_a
    cdef unsigned char[:, ::1] out_valid = out_valid_a

    cdef Field f
    f.theta0 = theta_v[0]
    f.w = &theta_v[1] if theta_v.shape[0] > 1 else NULL
    f.rc = &rc_v[0]
    f.zc = &zc_v[0]
    f.rows = zc_v.shape[0]
    f.cols = rc_v.shape[0]
    f.lam_r = lam_r
    f.lam_z = lam_z
    f.er = <double*>malloc(f.cols * sizeof(double))
    f.der = <double*>malloc(f.cols * sizeof(double))
    f.ez = <double*>malloc(f.rows * sizeof(double))
    if f.er == NULL or f.der == NULL or f.ez == NULL:
        raise MemoryError()

    cdef double s_max = 4.0 * max_range + 100.0
    cdef int max_steps = <int>(s_max / step) + 2
    cdef int i, j, n_surf, n_bot, istep
    cdef bint alive
    cdef double r, z, phi, t, s, bre, bim
    cdef double c0, gr0, gz0, c1, gr1, gz1, c2, gr2, gz2, c3, gr3, gz3
    cdef double k1r, k1z, k1f, k1t, k2r, k2z, k2f, k2t
    cdef double k3r, k3z, k3f, k3t, k4r, k4z, k4f, k4t
    cdef double h2, wgt, p1, p2, p3, r2_, z2_, f2_, t2_, s2_
    cdef double bound, u, r_c, t_c, s_c, cre, cim, nre, nim, c_here, gdum1, gdum2

    with nogil:
        for i in range(n_rays):
            r = src_r
            z = src_z
            phi = ang_v[i]
            t = 0.0
            s = 0.0
            bre = 1.0
            bim = 0.0
            n_surf = 0
            n_bot = 0
            j = 0
            alive = True
            for istep in range(max_steps):
                if (not alive) or j >= n_rx or r >= max_range:
                    break
                field_eval(&f, r, z, &c0, &gr0, &gz0)
                k1r = cos(phi); k1z = -sin(phi)
                k1f = (sin(phi) * gr0 + cos(phi) * gz0) / c0
                k1t = 1.0 / c0
                h2 = 0.5 * step
                field_eval(&f, r + h2 * k1r, z + h2 * k1z, &c1, &gr1, &gz1)
                p1 = phi + h2 * k1f
                k2r = cos(p1); k2z = -sin(p1)
                k2f = (sin(p1) * gr1 + cos(p1) * gz1) / c1
                k2t = 1.0 / c1
                field_eval(&f, r + h2 * k2r, z + h2 * k2z, &c2, &gr2, &gz2)
                p2 = phi + h2 * k2f
                k3r = cos(p2); k3z = -sin(p2)
                k3f = (sin(p2) * gr2 + cos(p2) * gz2) / c2
                k3t = 1.0 / c2
                field_eval(&f, r + step * k3r, z + step * k3z, &c3, &gr3, &gz3)
                p3 = phi + step * k3f
                k4r = cos(p3); k4z = -sin(p3)
                k4f = (sin(p3) * gr3 + cos(p3) * gz3) / c3
                k4t = 1.0 / c3
                wgt = step / 6.0
                r2_ = r + wgt * (k1r + 2 * k2r + 2 * k3r + k4r)
                z2_ = z + wgt * (k1z + 2 * k2z + 2 * k3z + k4z)
                f2_ = phi + wgt * (k1f + 2 * k2f + 2 * k3f + k4f)
                t2_ = t + wgt * (k1t + 2 * k2t + 2 * k3t + k4t)
                s2_ = s + step

                if r2_ <= r or cos(f2_) < _MIN_COS:
                    alive = False
                    break

                if z2_ < 0.0 or z2_ > water_depth:
                    bound = 0.0 if z2_ < 0.0 else water_depth
                    u = (bound - z) / (z2_ - z)
                    r_c = r + u * (r2_ - r)
                    t_c = t + u * (t2_ - t)
                    s_c = s + u * step
                    j = record(rx_v, j, n_rx, r, r_c, z, bound, t, t_c,
                               s, s_c, bre, bim, n_surf, n_bot,
                               out_z, out_t, out_s, out_bre, out_bim,
                               out_sig, out_valid, i)
                    if n_surf + n_bot >= max_bounces:
                        alive = False
                        break
                    if bound == 0.0:
                        cre = -1.0
                        cim = 0.0
                        n_surf += 1
                    else:
                        if absorbing_bottom:
                            alive = False
                            break
                        field_eval(&f, r_c, bound, &c_here, &gdum1, &gdum2)
                        rayleigh(c_here, c_bottom, rho_water, rho_bottom,
                                 fabs(f2_), &cre, &cim)
                        n_bot += 1
                    nre = bre * cre - bim * cim
                    nim = bre * cim + bim * cre
                    bre = nre
                    bim = nim
                    z2_ = 2.0 * bound - z2_
                    f2_ = -f2_
                    if z2_ < 0.0 or z2_ > water_depth:
                        alive = False
                        break
                    j = record(rx_v, j, n_rx, r_c, r2_, bound, z2_, t_c, t2_,
                               s_c, s2_, bre, bim, n_surf, n_bot,
                               out_z, out_t, out_s, out_bre, out_bim,
                               out_sig, out_valid, i)
                else:
                    j = record(rx_v, j, n_rx, r, r2_, z, z2_, t, t2_,
                               s, s2_, bre, bim, n_surf, n_bot,
                               out_z, out_t, out_s, out_bre, out_bim,
                               out_sig, out_valid, i)

                r = r2_
                z = z2_
                phi = f2_
                t = t2_
                s = s2_

    free(f.er)
    free(f.der)
    free(f.ez)
    return out_z_a, out_t_a, out_s_a, out_bre_a, out_bim_a, out_sig_a, out_valid_a
