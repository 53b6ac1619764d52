"""Network layout, user drops and large-scale fading.

Base stations sit on the corners of a square service area; each cell is the
part of the square closest to its BS (for the 4-cell layout these are the
four quadrants). Distances are in km, angles in rad, powers in W unless the
name says dB/dBm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

#: Ratio between the cluster separation r and the link distance b.
CLUSTER_DISTANCE_RATIO = 0.7
#: Distance of the transmit scatterers from the BS relative to b. Recorded
#: for completeness; it does not enter any correlation formula.
TX_SCATTERER_DISTANCE_RATIO = 0.2

_MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class NetworkConfig:
    L: int = 4
    K: int = 5
    M: int = 100
    area_side_km: float = 1.0
    min_bs_user_distance_km: float = 0.1
    shadowing_std_db: float = 7.0
    noise_power_dbm: float = -96.0
    edge_snr_db: float = -3.0
    tau_c: int = 200
    bandwidth_hz: float = 20e6

    def __post_init__(self):
        for name in ("L", "K", "M", "tau_c"):
            if int(getattr(self, name)) < 1:
                raise ConfigError("must be a positive integer", key=name)
        if not 0 <= self.min_bs_user_distance_km < self.area_side_km:
            raise ConfigError(
                "must satisfy 0 <= min distance < area side",
                key="min_bs_user_distance_km",
            )
        if self.shadowing_std_db < 0:
            raise ConfigError("must be nonnegative", key="shadowing_std_db")

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watt(self.noise_power_dbm)


@dataclass(frozen=True)
class LinkGeometry:
    """Geometry of one link (user k of cell i to BS l)."""

    distance_km: float
    azimuth_rad: float
    cluster_distance_km: float
    shadowing_db: float
    beta_db: float

    @property
    def beta_linear(self) -> float:
        return 10.0 ** (self.beta_db / 10.0)


@dataclass
class UserDrop:
    """One random realization of user locations and shadowing.

    Link arrays are indexed ``[i, k, l]``: user ``k`` of cell ``i`` seen by
    BS ``l``.
    """

    bs_positions: np.ndarray  # (L, 2)
    user_positions: np.ndarray  # (L, K, 2)
    distance_km: np.ndarray  # (L, K, L)
    azimuth_rad: np.ndarray
    shadowing_db: np.ndarray
    beta_db: np.ndarray
    uplink_power: float
    broadside_rad: np.ndarray = field(default=None)

    @property
    def cluster_distance_km(self) -> np.ndarray:
        return CLUSTER_DISTANCE_RATIO * self.distance_km

    @property
    def beta_linear(self) -> np.ndarray:
        return 10.0 ** (self.beta_db / 10.0)

    def link(self, i: int, k: int, l: int) -> LinkGeometry:
        return LinkGeometry(
            distance_km=float(self.distance_km[i, k, l]),
            azimuth_rad=float(self.azimuth_rad[i, k, l]),
            cluster_distance_km=float(self.cluster_distance_km[i, k, l]),
            shadowing_db=float(self.shadowing_db[i, k, l]),
            beta_db=float(self.beta_db[i, k, l]),
        )

    def to_dict(self) -> dict:
        return {
            "bs_positions": self.bs_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "distance_km": self.distance_km.tolist(),
            "azimuth_rad": self.azimuth_rad.tolist(),
            "shadowing_db": self.shadowing_db.tolist(),
            "beta_db": self.beta_db.tolist(),
            "uplink_power": self.uplink_power,
        }


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * np.log10(w) + 30.0


def place_base_stations(config: NetworkConfig) -> np.ndarray:
    """Corner placement of the BSs on the square of side ``area_side_km``.

    L=4 uses all four corners, L=1 the origin, L=2 two opposite corners and
    L=3 three corners. Larger L has no corner rule.
    """
    s = float(config.area_side_km)
    corners = {
        1: [(0.0, 0.0)],
        2: [(0.0, 0.0), (s, s)],
        3: [(0.0, 0.0), (0.0, s), (s, 0.0)],
        4: [(0.0, 0.0), (0.0, s), (s, 0.0), (s, s)],
    }
    if config.L not in corners:
        raise ConfigError(f"no BS placement rule for L={config.L}", key="L")
    return np.array(corners[config.L], dtype=float)


def default_broadside(bs_positions: np.ndarray, area_side_km: float) -> np.ndarray:
    """Array broadside of every BS, pointing from its corner to the center."""
    center = np.array([area_side_km / 2.0, area_side_km / 2.0])
    d = center - np.asarray(bs_positions, dtype=float)
    return np.arctan2(d[:, 1], d[:, 0])


def wrap_angle(x):
    """Wrap angles to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def link_azimuth(bs_position, array_broadside_rad, user_position):
    """Azimuth of a user relative to the broadside of a BS array.

    Broadcasts over leading dimensions of ``user_position`` (last axis = x, y).
    """
    d = np.asarray(user_position, dtype=float) - np.asarray(bs_position, dtype=float)
    if np.any(np.hypot(d[..., 0], d[..., 1]) == 0.0):
        raise DomainError("user and BS positions coincide")
    out = wrap_angle(np.arctan2(d[..., 1], d[..., 0]) - array_broadside_rad)
    return float(out) if out.ndim == 0 else out


def pathloss_beta_db(b_km, z_db=0.0):
    """Large-scale fading ``-128.1 - 37.6 log10(b) + z`` in dB."""
    b = np.asarray(b_km, dtype=float)
    if np.any(b <= 0):
        raise DomainError("distance must be positive")
    out = -128.1 - 37.6 * np.log10(b) + np.asarray(z_db, dtype=float)
    return float(out) if out.ndim == 0 else out


def cell_edge_distance_km(config: NetworkConfig) -> float:
    """Distance from a corner BS to the square center (common cell edge)."""
    return config.area_side_km / math.sqrt(2.0)


def calibrate_uplink_power(config: NetworkConfig, pathloss=pathloss_beta_db) -> float:
    """Transmit power (W) giving the target median SNR at the cell edge.

    The median is taken over log-normal shadowing, i.e. at z = 0 dB.
    """
    beta_edge_db = pathloss(cell_edge_distance_km(config), 0.0)
    p_dbm = config.edge_snr_db + config.noise_power_dbm - beta_edge_db
    return float(dbm_to_watt(p_dbm))


def _serving_region_sample(rng, config, bs_positions, cell, size):
    """Rejection-sample ``size`` points in the cell of BS ``cell``."""
    s = config.area_side_km
    dmin = config.min_bs_user_distance_km
    out = np.empty((size, 2))
    filled = 0
    tries = 0
    while filled < size:
        tries += 1
        if tries > _MAX_REJECTIONS:
            raise ConfigError(
                "user placement exceeded its retry budget; min distance too "
                "large for the cell region",
                key="min_bs_user_distance_km",
            )
        pts = rng.uniform(0.0, s, size=(size, 2))
        dist = np.linalg.norm(pts[:, None, :] - bs_positions[None, :, :], axis=-1)
        ok = (np.argmin(dist, axis=1) == cell) & (dist[:, cell] >= dmin)
        take = pts[ok][: size - filled]
        out[filled : filled + len(take)] = take
        filled += len(take)
    return out


def drop_users(rng, config: NetworkConfig, bs_positions=None, broadside_rad=None) -> UserDrop:
    """Draw user positions and shadowing, and fill every link's geometry."""
    if bs_positions is None:
        bs_positions = place_base_stations(config)
    bs_positions = np.asarray(bs_positions, dtype=float)
    if broadside_rad is None:
        broadside_rad = default_broadside(bs_positions, config.area_side_km)
    L, K = config.L, config.K

    users = np.stack(
        [_serving_region_sample(rng, config, bs_positions, i, K) for i in range(L)]
    )
    # (L, K, L): user (i, k) to BS l
    delta = users[:, :, None, :] - bs_positions[None, None, :, :]
    dist = np.hypot(delta[..., 0], delta[..., 1])
    azimuth = wrap_angle(np.arctan2(delta[..., 1], delta[..., 0]) - broadside_rad[None, None, :])
    shadowing = config.shadowing_std_db * rng.standard_normal((L, K, L))
    beta_db = pathloss_beta_db(dist, shadowing)
    return UserDrop(
        bs_positions=bs_positions,
        user_positions=users,
        distance_km=dist,
        azimuth_rad=azimuth,
        shadowing_db=shadowing,
        beta_db=beta_db,
        uplink_power=calibrate_uplink_power(config),
        broadside_rad=np.asarray(broadside_rad, dtype=float),
    )
