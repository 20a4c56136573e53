"""Transmission loss from a fixed transmitter via 2-D ray tracing.

The in-repo substitute for an external acoustic solver: a fan of rays is
traced through the sound-speed field (refraction driven by the analytic
field gradient), reflected specularly at the surface (pressure-release,
coefficient -1) and at the bottom (two-fluid Rayleigh coefficient), and
eigenrays at a receiver are built by interpolating between adjacent fan
rays with the same bounce history. The coherent complex sum of arrivals,
each with spherical spreading 1/s and phase omega*t, gives

    TL = -20 log10 |p|        (unit pressure at 1 m reference).

A compiled kernel is used when available; set ``SSPEST_PURE_PYTHON=1``
to force the numpy fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _ray_kernel_py
from .field import SspField

if os.environ.get("SSPEST_PURE_PYTHON"):
    _kernel = _ray_kernel_py
else:
    try:
        from . import _ray_kernel as _kernel
    except ImportError:       # extension not built
        _kernel = _ray_kernel_py

KERNEL_COMPILED = _kernel is not _ray_kernel_py

_P_FLOOR = 1e-30


@dataclass(frozen=True)
class Environment:
    """Known acoustic environment around the region of interest."""

    water_depth: float = 50.0
    max_range: float = 2000.0
    tx_range: float = 0.0
    tx_depth: float = 25.0
    frequency: float = 5000.0
    bottom_speed: float = 5000.0
    bottom_density: float = 2500.0
    water_density: float = 1000.0

    def __post_init__(self):
        if not 0.0 < self.tx_depth < self.water_depth:
            raise ValueError("transmitter depth must lie strictly inside the water column")
        if self.frequency <= 0 or self.bottom_speed <= 0:
            raise ValueError("frequency and bottom sound speed must be positive")


@dataclass(frozen=True)
class RayFanConfig:
    """Discretization of the ray fan (solver plumbing, not physics)."""

    num_rays: int = 181
    span_deg: float = 60.0          # symmetric about horizontal
    step_length: float = 1.0        # m of arclength per integration step
    max_bounces: int = 20
    absorbing_bottom: bool = False  # |R| = 0 override for diagnostics

    def __post_init__(self):
        if self.num_rays < 2:
            raise ValueError("need at least two rays")
        if self.step_length <= 0:
            raise ValueError("step length must be positive")

    @property
    def angles(self) -> np.ndarray:
        span = np.deg2rad(self.span_deg)
        return np.linspace(-span, span, self.num_rays)


def bottom_reflection_coefficient(env: Environment, grazing_angle: float,
                                  water_speed: float = 1500.0) -> complex:
    """Two-fluid Rayleigh reflection coefficient at the bottom interface.

    ``grazing_angle`` in radians, in (0, pi/2]. |R| <= 1 for lossless
    media and |R| -> 1 at grazing incidence.
    """
    if not 0.0 < grazing_angle <= np.pi / 2 + 1e-12:
        raise ValueError("grazing angle must be in (0, 90] degrees")
    return _ray_kernel_py.rayleigh_coefficient(
        water_speed, env.bottom_speed, env.water_density,
        env.bottom_density, grazing_angle)


class LinearGradientModel:
    """c(z) = c0 + g*z; test model with a closed-form circular-arc ray."""

    def __init__(self, c0: float, g: float):
        self.c0, self.g = c0, g

    def speed(self, r, z):
        return self.c0 + self.g * z

    def speed_gradient(self, r, z):
        return 0.0, self.g


@dataclass
class RayPath:
    """Output of a single-ray trace."""

    points: np.ndarray          # (n, 2) of (range, depth)
    times: np.ndarray           # cumulative travel time per point
    travel_time: float
    path_length: float
    bounce_product: complex     # cumulative boundary reflection coefficient
    n_surface: int
    n_bottom: int


def ray_trace(env: Environment, model, launch_angle: float,
              cfg: RayFanConfig | None = None) -> RayPath:
    """Trace one ray from the transmitter through an arbitrary sound-speed
    model (anything exposing ``speed(r, z)`` and ``speed_gradient(r, z)``).

    ``launch_angle`` is radians from horizontal, positive toward the
    surface. Terminates at max range, the bounce limit, or the path
    length cap.
    """
    cfg = cfg or RayFanConfig()
    if abs(launch_angle) >= np.pi / 2:
        raise ValueError("launch angle must satisfy |angle| < 90 degrees")
    ds = cfg.step_length
    if ds <= 0 or np.cos(launch_angle) * ds == 0.0:
        raise ValueError("step length produces zero displacement")

    def deriv(r, z, phi):
        c = model.speed(r, z)
        gr, gz = model.speed_gradient(r, z)
        return (np.cos(phi), -np.sin(phi),
                (np.sin(phi) * gr + np.cos(phi) * gz) / c, 1.0 / c)

    r, z, phi, t, s = env.tx_range, env.tx_depth, float(launch_angle), 0.0, 0.0
    bounce = complex(1.0, 0.0)
    n_surf = n_bot = 0
    pts = [(r, z)]
    times = [0.0]
    s_max = 4.0 * env.max_range + 100.0
    while r < env.max_range and s < s_max:
        k1 = deriv(r, z, phi)
        k2 = deriv(r + 0.5 * ds * k1[0], z + 0.5 * ds * k1[1], phi + 0.5 * ds * k1[2])
        k3 = deriv(r + 0.5 * ds * k2[0], z + 0.5 * ds * k2[1], phi + 0.5 * ds * k2[2])
        k4 = deriv(r + ds * k3[0], z + ds * k3[1], phi + ds * k3[2])
        w = ds / 6.0
        r2 = r + w * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        z2 = z + w * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        f2 = phi + w * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        t2 = t + w * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        if r2 <= r or np.cos(f2) < _ray_kernel_py._MIN_COS:
            break
        if z2 < 0.0 or z2 > env.water_depth:
            bound = 0.0 if z2 < 0.0 else env.water_depth
            if n_surf + n_bot >= cfg.max_bounces:
                u = (bound - z) / (z2 - z)
                pts.append((r + u * (r2 - r), bound))
                times.append(t + u * (t2 - t))
                s += u * ds
                t = times[-1]
                break
            u = (bound - z) / (z2 - z)
            r_c = r + u * (r2 - r)
            t_c = t + u * (t2 - t)
            pts.append((r_c, bound))
            times.append(t_c)
            if bound == 0.0:
                bounce *= -1.0
                n_surf += 1
            else:
                if cfg.absorbing_bottom:
                    s += u * ds
                    t = t_c
                    bounce = 0.0
                    break
                c_here = model.speed(r_c, bound)
                bounce *= _ray_kernel_py.rayleigh_coefficient(
                    c_here, env.bottom_speed, env.water_density,
                    env.bottom_density, abs(f2))
                n_bot += 1
            z2 = 2.0 * bound - z2
            f2 = -f2
            if z2 < 0.0 or z2 > env.water_depth:
                break
        r, z, phi, t = r2, z2, f2, t2
        s += ds
        pts.append((r, z))
        times.append(t)
    return RayPath(np.asarray(pts), np.asarray(times), t, s, bounce,
                   n_surf, n_bot)


class RayFanModel:
    """Pluggable forward model mapping (field, receiver) -> TL in dB.

    An adapter for an external solver can replace this class anywhere a
    propagation model is consumed; only ``transmission_loss`` and
    ``transmission_loss_many`` are relied upon.
    """

    def __init__(self, env: Environment, cfg: RayFanConfig | None = None):
        self.env = env
        self.cfg = cfg or RayFanConfig()
        self._angles = self.cfg.angles

    def _fan(self, field: SspField, rx_ranges: np.ndarray):
        b = field.basis
        return _kernel.trace_fan(
            field.theta, b.range_centers, b.depth_centers,
            b.lam_range, b.lam_depth,
            self.env.tx_range, self.env.tx_depth,
            self.env.water_depth, self.env.max_range,
            self._angles, self.cfg.step_length, self.cfg.max_bounces,
            self.env.bottom_speed, self.env.bottom_density,
            self.env.water_density, int(self.cfg.absorbing_bottom),
            rx_ranges)

    def transmission_loss(self, field: SspField, rx) -> float:
        return float(self.transmission_loss_many(field, np.asarray(rx, float)[None, :])[0])

    def transmission_loss_many(self, field: SspField, rx_points) -> np.ndarray:
        """TL at each (range, depth) receiver, one fan trace total."""
        rx_points = np.asarray(rx_points, float)
        if not np.all(np.isfinite(rx_points)):
            raise ValueError("receiver positions must be finite")
        d2 = ((rx_points[:, 0] - self.env.tx_range) ** 2
              + (rx_points[:, 1] - self.env.tx_depth) ** 2)
        if np.any(d2 < 1.0):
            raise ValueError("receiver within 1 m of the transmitter "
                             "(spreading singularity)")
        ranges, inv = np.unique(rx_points[:, 0], return_inverse=True)
        cz, ct, cs, cbre, cbim, csig, cvalid = self._fan(field, ranges)
        omega = 2.0 * np.pi * self.env.frequency
        tl = np.empty(len(rx_points))
        for ir in range(len(ranges)):
            sel = np.nonzero(inv == ir)[0]
            p = _coherent_pressure_column(
                cz[:, ir], ct[:, ir], cs[:, ir], cbre[:, ir], cbim[:, ir],
                csig[:, ir], cvalid[:, ir], rx_points[sel, 1], omega,
                self.env.water_depth)
            tl[sel] = -20.0 * np.log10(np.maximum(np.abs(p), _P_FLOOR))
        return tl


def _coherent_pressure_column(z, t, s, bre, bim, sig, valid, zr_arr, omega,
                              water_depth) -> np.ndarray:
    """Coherent sum of eigenray arrivals for receivers at one range.

    Adjacent fan rays with identical bounce history that bracket a
    receiver depth define an eigenray by linear interpolation; with no
    bracket anywhere, the nearest ray contributes with a Gaussian beam
    weight so the result is defined everywhere.
    """
    zr_arr = np.atleast_1d(np.asarray(zr_arr, float))
    ok = valid.astype(bool)
    if not ok.any():
        return np.zeros(len(zr_arr), complex)
    pair = ok[:-1] & ok[1:] & (sig[:-1] == sig[1:])
    b = (bre + 1j * bim)
    # (pairs, receivers) bracket matrix: sign change of z - zr across a pair
    dz0 = z[:-1, None] - zr_arr[None, :]
    dz1 = z[1:, None] - zr_arr[None, :]
    bracket = pair[:, None] & (((dz0 < 0) & (dz1 >= 0)) | ((dz0 >= 0) & (dz1 < 0)))
    denom = (z[1:] - z[:-1])[:, None]
    safe = np.where(np.abs(denom) > 1e-12, denom, 1.0)
    u = np.where(np.abs(denom) > 1e-12, -dz0 / safe, 0.0)
    ti = t[:-1, None] + u * (t[1:] - t[:-1])[:, None]
    si = s[:-1, None] + u * (s[1:] - s[:-1])[:, None]
    si = np.where(bracket, si, 1.0)       # invalid pairs carry s = 0
    bi = b[:-1, None] * (1.0 - u) + b[1:, None] * u
    contrib = np.where(bracket, bi / si * np.exp(-1j * omega * ti), 0.0)
    total = contrib.sum(axis=0)
    miss = ~bracket.any(axis=0)
    if miss.any():
        dist = np.where(ok[:, None], np.abs(z[:, None] - zr_arr[None, :]), np.inf)
        for j in np.nonzero(miss)[0]:
            k = int(np.argmin(dist[:, j]))
            w = water_depth / max(len(z), 2)
            for nb in (k - 1, k + 1):
                if 0 <= nb < len(z) and ok[nb]:
                    w = max(abs(z[nb] - z[k]), 1e-3)
                    break
            weight = np.exp(-(z[k] - zr_arr[j]) ** 2 / (2.0 * w * w))
            total[j] = b[k] / s[k] * np.exp(-1j * omega * t[k]) * weight
    return total


def _coherent_pressure(z, t, s, bre, bim, sig, valid, zr, omega,
                       water_depth) -> complex:
    """Single-receiver wrapper around :func:`_coherent_pressure_column`."""
    return complex(_coherent_pressure_column(
        z, t, s, bre, bim, sig, valid, [zr], omega, water_depth)[0])


def transmission_loss(env: Environment, field: SspField, rx,
                      cfg: RayFanConfig | None = None) -> float:
    """Convenience wrapper: TL (dB) from the transmitter to ``rx``."""
    return RayFanModel(env, cfg).transmission_loss(field, rx)
