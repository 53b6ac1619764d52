import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsmimo.errors import ConfigError, DomainError
from dsmimo.geometry import (
    CLUSTER_DISTANCE_RATIO,
    NetworkConfig,
    calibrate_uplink_power,
    dbm_to_watt,
    drop_users,
    link_azimuth,
    pathloss_beta_db,
    place_base_stations,
    watt_to_dbm,
)


def test_corner_placement_unit_square():
    bs = place_base_stations(NetworkConfig(L=4, area_side_km=1.0))
    assert {tuple(p) for p in bs} == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_corner_placement_scales_with_side():
    bs = place_base_stations(NetworkConfig(L=4, area_side_km=2.0))
    assert {tuple(p) for p in bs} == {(0, 0), (0, 2), (2, 0), (2, 2)}


def test_single_cell_placement():
    np.testing.assert_array_equal(place_base_stations(NetworkConfig(L=1)), [[0.0, 0.0]])


def test_unsupported_cell_count():
    with pytest.raises(ConfigError):
        place_base_stations(NetworkConfig(L=7))


@pytest.mark.parametrize(
    "b, z, expected",
    [(1.0, 0.0, -128.1), (0.1, 0.0, -90.5), (0.1, 7.0, -83.5)],
)
def test_pathloss(b, z, expected):
    assert pathloss_beta_db(b, z) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("b", [0.0, -1.0])
def test_pathloss_domain(b):
    with pytest.raises(DomainError):
        pathloss_beta_db(b)


@given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(-20, 20))
def test_pathloss_monotone_and_positive(b1, b2, z):
    lo, hi = sorted((b1, b2))
    assert 10 ** (pathloss_beta_db(hi, z) / 10) > 0
    if hi > lo * (1 + 1e-9):
        assert pathloss_beta_db(hi, z) < pathloss_beta_db(lo, z)


def test_azimuth_examples():
    assert link_azimuth((0, 0), 0.0, (1, 0)) == pytest.approx(0.0)
    assert link_azimuth((0, 0), 0.0, (0, 1)) == pytest.approx(math.pi / 2)
    assert link_azimuth((0, 0), math.pi / 4, (1, 1)) == pytest.approx(0.0, abs=1e-15)


def test_azimuth_coincident():
    with pytest.raises(DomainError):
        link_azimuth((0.5, 0.5), 0.0, (0.5, 0.5))


@given(
    st.floats(-5, 5), st.floats(-5, 5), st.floats(-20, 20),
)
def test_azimuth_wrapped(x, y, broadside):
    if math.hypot(x, y) < 1e-9:
        return
    a = link_azimuth((0.0, 0.0), broadside, (x, y))
    assert -math.pi < a <= math.pi


def test_calibrated_power_value():
    # beta_edge = -128.1 - 37.6 log10(1/sqrt 2) = -122.4406 dB
    p = calibrate_uplink_power(NetworkConfig())
    assert watt_to_dbm(p) == pytest.approx(23.44063608151714, abs=1e-9)


def test_calibrated_power_median_edge_snr():
    cfg = NetworkConfig()
    p = calibrate_uplink_power(cfg)
    z = np.random.default_rng(1).normal(0.0, cfg.shadowing_std_db, 100_000)
    snr_db = watt_to_dbm(p) + pathloss_beta_db(1 / math.sqrt(2), z) - cfg.noise_power_dbm
    assert np.median(snr_db) == pytest.approx(-3.0, abs=0.1)


def test_calibration_identity_and_linearity():
    # 0 dB target with beta_edge equal to the noise power gives p = 1
    cfg = NetworkConfig(edge_snr_db=0.0)
    p = calibrate_uplink_power(cfg, pathloss=lambda b, z: cfg.noise_power_dbm - 30.0)
    assert p == pytest.approx(1.0)
    base = calibrate_uplink_power(NetworkConfig())
    doubled = calibrate_uplink_power(NetworkConfig(noise_power_dbm=-96.0 + 10 * math.log10(2)))
    assert doubled == pytest.approx(2 * base)


def test_dbm_roundtrip():
    assert watt_to_dbm(dbm_to_watt(-96.0)) == pytest.approx(-96.0)


@pytest.fixture(scope="module")
def many_drops():
    cfg = NetworkConfig(K=1)
    rng = np.random.default_rng(7)
    return cfg, [drop_users(rng, cfg) for _ in range(10_000)]


def test_min_serving_distance(many_drops):
    cfg, drops = many_drops
    serving = np.array([[d.distance_km[i, 0, i] for i in range(cfg.L)] for d in drops])
    assert serving.min() >= 0.1


def test_users_inside_own_quadrant(many_drops):
    cfg, drops = many_drops
    bs = place_base_stations(cfg)
    for d in drops[:500]:
        u = d.user_positions
        assert np.all((u >= 0) & (u <= 1))
        for i in range(cfg.L):
            # quadrant of the corner BS i
            assert np.all(np.abs(u[i, :, :] - bs[i]) <= 0.5 + 1e-12)


def test_shadowing_statistics():
    cfg = NetworkConfig()
    rng = np.random.default_rng(3)
    z = np.concatenate([drop_users(rng, cfg).shadowing_db.ravel() for _ in range(1_250)])
    assert z.size == 100_000
    assert abs(z.mean()) < 0.1
    assert z.std() == pytest.approx(7.0, abs=0.1)


def test_shadowing_independent_across_links(many_drops):
    cfg, drops = many_drops
    z = np.array([d.shadowing_db.reshape(-1) for d in drops])  # (drops, links)
    c = np.corrcoef(z, rowvar=False)
    off = c[~np.eye(c.shape[0], dtype=bool)]
    assert np.max(np.abs(off)) < 0.05


def test_link_geometry_consistency():
    cfg = NetworkConfig()
    d = drop_users(np.random.default_rng(0), cfg)
    assert d.distance_km.shape == (4, 5, 4)
    np.testing.assert_array_equal(d.cluster_distance_km, CLUSTER_DISTANCE_RATIO * d.distance_km)
    np.testing.assert_allclose(d.beta_db, pathloss_beta_db(d.distance_km, d.shadowing_db))
    lg = d.link(1, 2, 3)
    assert lg.cluster_distance_km == pytest.approx(0.7 * lg.distance_km)
    bs = place_base_stations(cfg)
    center = np.array([0.5, 0.5])
    expected = link_azimuth(bs[3], math.atan2(*(center - bs[3])[::-1]), d.user_positions[1, 2])
    assert lg.azimuth_rad == pytest.approx(expected)


def test_zero_min_distance_allowed():
    cfg = NetworkConfig(min_bs_user_distance_km=0.0)
    d = drop_users(np.random.default_rng(0), cfg)
    assert d.user_positions.shape == (4, 5, 2)


def test_retry_budget_exhausted():
    cfg = NetworkConfig(min_bs_user_distance_km=0.9)
    with pytest.raises(ConfigError):
        drop_users(np.random.default_rng(0), cfg)


@pytest.mark.parametrize("kw", [dict(L=0), dict(K=0), dict(min_bs_user_distance_km=2.0), dict(tau_c=0)])
def test_invalid_network(kw):
    with pytest.raises(ConfigError):
        NetworkConfig(**kw)
