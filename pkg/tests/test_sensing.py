"""Measurement generation and the joint measurement function."""

import numpy as np
import pytest

from sspest.field import SspField
from sspest.propagation import RayFanConfig, RayFanModel
from sspest.sensing import (MeasurementPair, NoiseSpec, SensorConfig, h_joint,
                            measure, measurement_covariance,
                            tl_noise_variance_db)


@pytest.fixture(scope="module")
def prop(env):
    return RayFanModel(env, RayFanConfig(num_rays=61, step_length=4.0))


@pytest.fixture(scope="module")
def true_field(basis, region):
    rng = np.random.default_rng(5)
    return SspField(rng.normal(1500.0, 5.0, size=37), basis, region)


def test_sensor_config_flags():
    assert SensorConfig.CTD.has_ctd and not SensorConfig.CTD.has_tl
    assert SensorConfig.TL.has_tl and not SensorConfig.TL.has_ctd
    assert SensorConfig.BOTH.has_ctd and SensorConfig.BOTH.has_tl
    assert (SensorConfig.CTD.dim, SensorConfig.TL.dim, SensorConfig.BOTH.dim) \
        == (1, 1, 2)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(sigma_ctd=-1.0)
    with pytest.raises(ValueError):
        NoiseSpec(tl_noise_domain="pascals")


def test_measurement_pair_vector():
    assert MeasurementPair(1500.0, 40.0, (0, 0), 0).vector().tolist() == [1500.0, 40.0]
    assert MeasurementPair(None, 40.0, (0, 0), 0).vector().tolist() == [40.0]
    assert MeasurementPair(1500.0, None, (0, 0), 0).vector().tolist() == [1500.0]


def test_zero_noise_ctd_is_exact(true_field, prop):
    rng = np.random.default_rng(0)
    noise = NoiseSpec(sigma_ctd=0.0, sigma_tl=0.0)
    p = (700.0, 20.0)
    y = measure(true_field, p, SensorConfig.CTD, noise, prop, rng)
    assert y.ctd == true_field.evaluate(p)
    assert y.tl is None


def test_zero_noise_matches_h_joint(true_field, basis, region, prop):
    rng = np.random.default_rng(0)
    noise = NoiseSpec(sigma_ctd=0.0, sigma_tl=0.0)
    p = (700.0, 20.0)
    y = measure(true_field, p, SensorConfig.BOTH, noise, prop, rng)
    h = h_joint(true_field.theta, p, SensorConfig.BOTH, basis, region, prop)
    np.testing.assert_array_equal(y.vector(), h)


def test_ctd_noise_std_statistical(true_field, prop):
    rng = np.random.default_rng(42)
    noise = NoiseSpec(sigma_ctd=1e-2, sigma_tl=0.0)
    p = (700.0, 20.0)
    clean = true_field.evaluate(p)
    draws = np.array([measure(true_field, p, SensorConfig.CTD, noise, prop,
                              rng).ctd - clean for _ in range(100000)])
    assert 0.0097 <= draws.std() <= 0.0103


def test_both_config_has_both_channels(true_field, prop):
    rng = np.random.default_rng(1)
    y = measure(true_field, (500.0, 10.0), SensorConfig.BOTH, NoiseSpec(),
                prop, rng)
    assert y.ctd is not None and y.tl is not None
    assert y.vector().shape == (2,)


def test_outside_region_rejected(true_field, prop):
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        measure(true_field, (2100.0, 20.0), SensorConfig.CTD, NoiseSpec(),
                prop, rng)


def test_measurement_sequence_reproducible(true_field, prop):
    def seq(seed):
        rng = np.random.default_rng(seed)
        return [measure(true_field, (600.0 + 5 * k, 15.0), SensorConfig.BOTH,
                        NoiseSpec(), prop, rng, k).vector() for k in range(10)]
    a, b = seq(99), seq(99)
    for ya, yb in zip(a, b):
        np.testing.assert_array_equal(ya, yb)


def test_noise_paired_across_sensor_configs(true_field, prop):
    # the CTD channel sees the same noise regardless of the TL channel
    noise = NoiseSpec(sigma_ctd=1e-2, sigma_tl=1e-5)
    p = (600.0, 15.0)
    ys_ctd = [measure(true_field, p, SensorConfig.CTD, noise, prop,
                      np.random.default_rng(s)).ctd for s in range(5)]
    ys_both = [measure(true_field, p, SensorConfig.BOTH, noise, prop,
                       np.random.default_rng(s)).ctd for s in range(5)]
    np.testing.assert_array_equal(ys_ctd, ys_both)


def test_pressure_domain_noise_round_trip(true_field, prop):
    # corrupting the pressure amplitude then converting back moves the dB
    # value by approximately the linearized dB-domain sigma
    rng = np.random.default_rng(3)
    noise = NoiseSpec(sigma_ctd=0.0, sigma_tl=1e-5)
    p = (300.0, 20.0)
    clean = prop.transmission_loss(true_field, p)
    errs = np.array([measure(true_field, p, SensorConfig.TL, noise, prop,
                             rng).tl - clean for _ in range(4000)])
    pred_std = np.sqrt(tl_noise_variance_db(clean, noise))
    assert errs.std() == pytest.approx(pred_std, rel=0.2)


def test_db_domain_noise_switch(true_field, prop):
    rng = np.random.default_rng(4)
    noise = NoiseSpec(sigma_ctd=0.0, sigma_tl=0.5, tl_noise_domain="db")
    p = (300.0, 20.0)
    clean = prop.transmission_loss(true_field, p)
    errs = np.array([measure(true_field, p, SensorConfig.TL, noise, prop,
                             rng).tl - clean for _ in range(4000)])
    assert errs.std() == pytest.approx(0.5, rel=0.1)
    assert tl_noise_variance_db(clean, noise) == 0.25


def test_tl_variance_floor():
    # huge predicted loss -> tiny amplitude -> variance would explode;
    # small predicted loss -> variance floored
    noise = NoiseSpec(sigma_tl=1e-5)
    # 40 dB loss: amplitude 0.01, linearized variance well above the floor
    assert tl_noise_variance_db(40.0, noise) == pytest.approx(
        (20.0 / np.log(10.0) / 0.01 * 1e-5) ** 2, rel=1e-12)
    assert tl_noise_variance_db(-40.0, noise) == 1e-6   # floored


def test_measurement_covariance_layout():
    noise = NoiseSpec(sigma_ctd=1e-2, sigma_tl=1e-5)
    r = measurement_covariance(SensorConfig.BOTH, noise, tl_pred_db=40.0)
    assert r.shape == (2, 2)
    assert r[0, 0] == 1e-4
    assert r[1, 1] == tl_noise_variance_db(40.0, noise)
    assert r[0, 1] == r[1, 0] == 0.0
    assert measurement_covariance(SensorConfig.CTD, noise).shape == (1, 1)


def test_h_joint_channel_order(true_field, basis, region, prop):
    p = (450.0, 30.0)
    h_both = h_joint(true_field.theta, p, SensorConfig.BOTH, basis, region, prop)
    h_ctd = h_joint(true_field.theta, p, SensorConfig.CTD, basis, region, prop)
    h_tl = h_joint(true_field.theta, p, SensorConfig.TL, basis, region, prop)
    assert h_both[0] == h_ctd[0] == pytest.approx(true_field.evaluate(p))
    assert h_both[1] == h_tl[0] == prop.transmission_loss(true_field, p)


def test_h_joint_constant_estimate(flat_theta, basis, region, prop):
    h = h_joint(flat_theta, (1000.0, 10.0), SensorConfig.CTD, basis, region, prop)
    assert h.shape == (1,)
    assert h[0] == 1500.0
