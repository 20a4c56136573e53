"""Measurement generation and the joint measurement function.

Channel order is fixed (CTD first, TL second) so the measurement noise
covariance is diag(sigma_ctd^2, sigma_tl_effective^2).

The TL noise scale is specified in pascals. By default the coherent
pressure amplitude is corrupted before the dB conversion, and the
filter-side variance for the TL channel is the dB-domain variance of
that perturbation linearized at the predicted pressure (floored at
1e-6 dB^2). Setting ``tl_noise_domain="db"`` instead adds the noise
directly to the TL value, with the scale read as dB.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .field import BasisGrid, Region, SspField

_DB_PER_NEPER = 20.0 / np.log(10.0)
_TL_VAR_FLOOR = 1e-6


class SensorConfig(Enum):
    CTD = "ctd"
    TL = "tl"
    BOTH = "both"

    @property
    def has_ctd(self) -> bool:
        return self in (SensorConfig.CTD, SensorConfig.BOTH)

    @property
    def has_tl(self) -> bool:
        return self in (SensorConfig.TL, SensorConfig.BOTH)

    @property
    def dim(self) -> int:
        return int(self.has_ctd) + int(self.has_tl)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_ctd: float = 1e-2        # m/s
    sigma_tl: float = 1e-5         # Pa (or dB when tl_noise_domain="db")
    tl_noise_domain: str = "pressure"

    def __post_init__(self):
        if self.sigma_ctd < 0 or self.sigma_tl < 0:
            raise ValueError("noise scales must be nonnegative")
        if self.tl_noise_domain not in ("pressure", "db"):
            raise ValueError("tl_noise_domain must be 'pressure' or 'db'")


@dataclass(frozen=True)
class MeasurementPair:
    """One time step's observation; absent channels are None."""

    ctd: float | None
    tl: float | None
    position: tuple
    time_index: int

    def vector(self) -> np.ndarray:
        vals = [v for v in (self.ctd, self.tl) if v is not None]
        return np.asarray(vals, float)


def tl_noise_variance_db(tl_pred_db: float, noise: NoiseSpec) -> float:
    """Filter-side variance of the TL channel in dB^2.

    For pressure-domain noise: var = (20 / (ln10 * |p|))^2 * sigma^2 with
    |p| the predicted pressure amplitude, floored at 1e-6 dB^2.
    """
    if noise.tl_noise_domain == "db":
        return max(noise.sigma_tl ** 2, _TL_VAR_FLOOR)
    amp = 10.0 ** (-tl_pred_db / 20.0)
    return max((_DB_PER_NEPER / amp * noise.sigma_tl) ** 2, _TL_VAR_FLOOR)


def measurement_covariance(sensors: SensorConfig, noise: NoiseSpec,
                           tl_pred_db: float = 0.0) -> np.ndarray:
    entries = []
    if sensors.has_ctd:
        entries.append(noise.sigma_ctd ** 2)
    if sensors.has_tl:
        entries.append(tl_noise_variance_db(tl_pred_db, noise))
    return np.diag(entries)


def h_joint(theta: np.ndarray, p, sensors: SensorConfig,
            basis: BasisGrid, region: Region, prop) -> np.ndarray:
    """Joint measurement function: stacked enabled channels at p.

    ``prop`` is the propagation model (``transmission_loss(field, rx)``).
    """
    theta = np.asarray(theta, float)
    out = []
    if sensors.has_ctd:
        out.append(float(basis.basis_vector(p) @ theta))
    if sensors.has_tl:
        field = SspField(theta, basis, region)
        out.append(prop.transmission_loss(field, p))
    return np.asarray(out)


def measure(true_field: SspField, p, sensors: SensorConfig,
            noise: NoiseSpec, prop, rng: np.random.Generator,
            time_index: int = 0) -> MeasurementPair:
    """Noisy observation of the true field at position p.

    Both channels' noise is always drawn so that runs with different
    sensor configurations but the same noise stream see identical
    per-channel noise sequences (paired Monte-Carlo comparisons).
    """
    if not true_field.region.contains(p):
        raise ValueError(f"measurement position {p} outside the region")
    e_ctd = rng.normal(0.0, noise.sigma_ctd) if noise.sigma_ctd > 0 else 0.0
    e_tl = rng.normal(0.0, noise.sigma_tl) if noise.sigma_tl > 0 else 0.0

    ctd = tl = None
    if sensors.has_ctd:
        ctd = true_field.evaluate(p) + e_ctd
    if sensors.has_tl:
        tl_clean = prop.transmission_loss(true_field, p)
        if noise.tl_noise_domain == "db":
            tl = tl_clean + e_tl
        elif e_tl == 0.0:
            tl = tl_clean
        else:
            amp = 10.0 ** (-tl_clean / 20.0)
            tl = -20.0 * np.log10(max(amp + e_tl, 1e-30))
    return MeasurementPair(ctd, tl, (float(p[0]), float(p[1])), time_index)
