"""Monte-Carlo evaluation of the uplink spectral-efficiency lower bound.

Each user drop fixes the geometry and large-scale fading. For every channel
model the drop then runs ``n_fading`` coherence intervals (sample channels,
de-spread pilots, LMMSE-estimate, detect) and accumulates the expectations
of the effective SINR

    p |E{v^H h}|^2 / (sum_{i,t} p E{|v^H h_it|^2} - p |E{v^H h}|^2 + s2 E{||v||^2})

from a common set of realizations. Inside a drop all powers are normalized
by the noise power, so the noise variance is 1 and ``p * beta`` is an SNR.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .config import ExperimentConfig, ModelTemplate
from .detection import DetectorKind, detector_matrix, gram, ill_conditioned
from .errors import DomainError, NumericalError
from .estimation import LmmseFilter, build_pilot_plan, despread_pilots, lmmse_filter
from .geometry import CLUSTER_DISTANCE_RATIO, UserDrop, drop_users, place_base_stations

log = logging.getLogger(__name__)

GEOMETRY_STREAM = 0
FADING_STREAM = 1


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


# Per-drop channel statistics


@dataclass
class DropChannels:
    """Channel statistics of every link of one drop under one model.

    ``beta`` (L, K, L) is noise-normalized. For double scattering ``A``
    (L, K, L, M, S) and ``At`` (L, K, L, S, S) are the steering factors of
    R and Rt.
    """

    beta: np.ndarray
    M: int
    A: np.ndarray | None = None
    At: np.ndarray | None = None

    @property
    def is_rayleigh(self) -> bool:
        return self.A is None

    def second_moments(self) -> np.ndarray:
        """E{h h^H} of every link, shape (L, K, L, M, M)."""
        b = self.beta[..., None, None]
        if self.is_rayleigh:
            return b * np.eye(self.M, dtype=complex)
        return b * (self.A @ np.conj(np.swapaxes(self.A, -1, -2)))

    def sample(self, rng, n: int) -> np.ndarray:
        """``n`` independent realizations, shape (n, L, K, L, M)."""
        if self.is_rayleigh:
            return np.sqrt(self.beta)[..., None] * ch.crandn(rng, n, *self.beta.shape, self.M)
        h = ch.sample_double_scattering_fast(rng, self.A, self.At, self.beta, n)
        return np.moveaxis(h, -1, 0)


def drop_channels(drop: UserDrop, template: ModelTemplate, config: ExperimentConfig) -> DropChannels:
    net = config.network
    beta = drop.beta_linear / net.noise_power_w
    if template.kind == "rayleigh":
        return DropChannels(beta=beta, M=net.M)
    S = template.S
    unit = ch.scatterer_angles(S, 1.0)
    alpha = drop.azimuth_rad
    A = ch.steering_factor(net.M, template.d_l, alpha, unit * config.angular_spread_rad)
    r = ch.km_to_wavelengths(CLUSTER_DISTANCE_RATIO * drop.distance_km, config.carrier_hz)
    spread = ch.scatterer_angle_spread(config.scatterer_spacing, S, r)
    At = ch.steering_factor(S, config.scatterer_spacing, alpha, unit * np.asarray(spread)[..., None])
    return DropChannels(beta=beta, M=net.M, A=A, At=At)


def link_spec(drop: UserDrop, template: ModelTemplate, config: ExperimentConfig, i, k, l):
    """Single-link :mod:`channel` model spec, for cross-checks."""
    beta = float(drop.beta_linear[i, k, l] / config.network.noise_power_w)
    if template.kind == "rayleigh":
        return ch.UncorrelatedRayleigh(beta)
    return ch.DoubleScattering(
        ch.DoubleScatteringParams(
            S=template.S,
            d_l=template.d_l,
            d_S=config.scatterer_spacing,
            theta=config.angular_spread_rad,
            alpha=float(drop.azimuth_rad[i, k, l]),
            r_km=float(CLUSTER_DISTANCE_RATIO * drop.distance_km[i, k, l]),
            beta_linear=beta,
            carrier_hz=config.carrier_hz,
        )
    )


# SINR accumulation


@dataclass
class SinrAccumulator:
    """Running sums of the expectations in the SINR, per user (l, k).

    ``cross`` holds sums of |v_{l,k}^H h_{i,t}^l|^2 indexed ``[l, k, i, t]``.
    Means are ``sum / count``; accumulators merge by adding sums.
    """

    signal: np.ndarray  # complex (L, K)
    cross: np.ndarray  # (L, K, L, K)
    norm: np.ndarray  # (L, K)
    count: np.ndarray  # (L, K)

    @classmethod
    def zeros(cls, L: int, K: int) -> "SinrAccumulator":
        return cls(
            signal=np.zeros((L, K), dtype=complex),
            cross=np.zeros((L, K, L, K)),
            norm=np.zeros((L, K)),
            count=np.zeros((L, K)),
        )

    def merge(self, other: "SinrAccumulator") -> "SinrAccumulator":
        return SinrAccumulator(
            self.signal + other.signal,
            self.cross + other.cross,
            self.norm + other.norm,
            self.count + other.count,
        )

    def means(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            c = self.count
            return self.signal / c, self.cross / c[..., None, None], self.norm / c


def accumulate_batch(acc: SinrAccumulator, channels, V, valid=None) -> None:
    """Add ``n`` realizations to ``acc`` in place.

    ``channels`` (n, L, K, L, M) and ``V`` (n, L, M, K) must come from the
    same coherence intervals. ``valid`` (n, L) drops a realization from a
    cell's sums (ZF singularity exclusion).
    """
    H = np.asarray(channels)
    n, L, K, _, M = H.shape
    # (n, l, i*K + t, M): every channel seen by BS l
    H_bs = np.ascontiguousarray(H.transpose(0, 3, 1, 2, 4)).reshape(n, L, L * K, M)
    Vh = np.conj(np.swapaxes(V, -1, -2))  # (n, L, K, M)
    prod = Vh @ np.swapaxes(H_bs, -1, -2)  # (n, L, K, L*K)
    own = np.arange(L)[:, None] * K + np.arange(K)[None, :]
    sig = np.take_along_axis(prod, own[None, :, :, None], axis=-1)[..., 0]
    w = np.ones((n, L)) if valid is None else np.asarray(valid, dtype=float)
    w3 = w[:, :, None]
    acc.signal += np.sum(w3 * sig, axis=0)
    acc.cross += np.sum(w3[..., None] * (prod.real**2 + prod.imag**2), axis=0).reshape(L, K, L, K)
    acc.norm += np.sum(w3 * np.sum(np.abs(V) ** 2, axis=-2), axis=0)
    acc.count += np.sum(w3 * np.ones((1, 1, K)), axis=0)


def accumulate_realization(acc: SinrAccumulator, channels, V, valid=None) -> None:
    """Single-realization form of :func:`accumulate_batch`."""
    accumulate_batch(
        acc,
        np.asarray(channels)[None],
        np.asarray(V)[None],
        None if valid is None else np.asarray(valid)[None],
    )


def finalize_sinr(acc: SinrAccumulator, powers, noise_var: float):
    """Effective SINR of every user from accumulated expectations.

    Returns ``(sinr, n_clamped)``. Users with a nonpositive denominator or no
    valid realization get SINR 0 and are counted in ``n_clamped``.
    """
    if np.any(acc.count < 1):
        log.warning("SINR requested for users without valid realizations")
    L, K = acc.signal.shape
    p = np.broadcast_to(np.asarray(powers, dtype=float), (L, K))
    mean_sig, mean_cross, mean_norm = acc.means()
    num = p * np.abs(mean_sig) ** 2
    total = np.einsum("lkit,it->lk", mean_cross, p)
    own = mean_cross[np.arange(L)[:, None], np.arange(K)[None, :], np.arange(L)[:, None], np.arange(K)[None, :]]
    # Jensen: E|X|^2 >= |E X|^2, within 3 standard errors of the mean
    se = np.sqrt(np.maximum(own - np.abs(mean_sig) ** 2, 0.0) / np.maximum(acc.count, 1))
    if np.any(own - np.abs(mean_sig) ** 2 < -3 * se * np.abs(mean_sig) - 1e-12 * own):
        raise NumericalError("interference moment below the signal moment")
    den = total - num + noise_var * mean_norm
    bad = ~(den > 0) | ~np.isfinite(den) | (acc.count < 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinr = np.where(bad, 0.0, num / np.where(bad, 1.0, den))
    n_bad = int(np.sum(bad & (num > 0))) + int(np.sum(acc.count < 1))
    if n_bad:
        log.warning("clamped %d SINR values with nonpositive denominator", n_bad)
    return sinr, n_bad


def spectral_efficiency(sinr, tau_p: int, tau_c: int):
    """Lower bound ``(1 - tau_p/tau_c) log2(1 + sinr)`` in bit/s/Hz."""
    if tau_p > tau_c:
        raise DomainError("tau_p exceeds tau_c")
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise DomainError("negative SINR")
    out = (1.0 - tau_p / tau_c) * np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


def simulate_uplink_reception(rng, channels, powers, V, noise_var, symbols=None):
    """Received data signal at every BS and its combined decomposition.

    ``channels`` (L, K, L, M), ``V`` (L, M, K). Returns a dict with ``y``
    (L, M) and, per user (L, K), the combined output ``combined`` and its
    parts ``desired``, ``intra``, ``inter``, ``noise``. Symbols default to
    unit-power CN(0, 1) draws.
    """
    H = np.asarray(channels)
    L, K, _, M = H.shape
    p = np.broadcast_to(np.asarray(powers, dtype=float), (L, K))
    x = ch.crandn(rng, L, K) if symbols is None else np.asarray(symbols)
    n = np.sqrt(noise_var) * ch.crandn(rng, L, M)
    tx = np.sqrt(p) * x  # (i, t)
    y = np.einsum("itlm,it->lm", H, tx) + n
    Vh = np.conj(np.swapaxes(V, -1, -2))  # (l, k, M)
    # a[l, k, i, t] = sqrt(p_it) v_lk^H h_it^l x_it
    a = np.einsum("lkm,itlm->lkit", Vh, H) * tx[None, None]
    idx_l = np.arange(L)[:, None]
    idx_k = np.arange(K)[None, :]
    desired = a[idx_l, idx_k, idx_l, idx_k]
    same_cell = np.stack([a[l, :, l, :] for l in range(L)])  # (l, k, t)
    intra = same_cell.sum(axis=-1) - desired
    inter = a.sum(axis=(-1, -2)) - same_cell.sum(axis=-1)
    noise = np.einsum("lkm,lm->lk", Vh, n)
    return {
        "y": y,
        "combined": np.einsum("lkm,lm->lk", Vh, y),
        "desired": desired,
        "intra": intra,
        "inter": inter,
        "noise": noise,
    }


# One drop


@dataclass
class DropResult:
    drop: int
    sinr: dict  # (model label, detector value) -> (L, K)
    zf_exclusions: dict  # model label -> excluded (realization, cell) pairs
    clamped: int
    geometry: UserDrop


def _estimate(filt: LmmseFilter, y) -> np.ndarray:
    # (n, L, K, M) -> per-cell estimate matrices (n, L, M, K)
    yt = np.moveaxis(y, 0, -1)  # (L, K, M, n)
    est = filt.B @ yt
    return np.moveaxis(est, -1, 0).swapaxes(-1, -2)


def run_model_on_drop(drop: UserDrop, template: ModelTemplate, config: ExperimentConfig, drop_index: int):
    """Accumulators per detector and the ZF exclusion count for one model."""
    net = config.network
    L, K = net.L, net.K
    plan = build_pilot_plan(L, K, config.reuse_factor, net.tau_c)
    powers = np.full((L, K), drop.uplink_power)
    links = drop_channels(drop, template, config)
    filt = lmmse_filter(links.second_moments(), plan, powers, 1.0)
    kinds = [DetectorKind.parse(d) for d in config.detectors]
    accs = {kind: SinrAccumulator.zeros(L, K) for kind in kinds}
    excluded = 0
    for c, start in enumerate(range(0, config.n_fading, config.chunk_size)):
        n = min(config.chunk_size, config.n_fading - start)
        rng = substream(config.master_seed, drop_index, FADING_STREAM, c)
        H = links.sample(rng, n)
        y = despread_pilots(rng, H, plan, powers, 1.0)
        H_hat = _estimate(filt, y)
        G = gram(H_hat) if any(k is not DetectorKind.MR for k in kinds) else None
        for kind in kinds:
            valid = None
            if kind is DetectorKind.ZF:
                valid = ~ill_conditioned(G)
                excluded += int(np.sum(~valid))
            V = detector_matrix(H_hat, powers[None], kind, G=G, check=False)
            accumulate_batch(accs[kind], H, V, valid)
    if excluded:
        log.info("drop %d, %s: excluded %d singular ZF realizations", drop_index, template.label, excluded)
    return accs, excluded


def run_drop(config: ExperimentConfig, drop_index: int) -> DropResult:
    net = config.network
    rng = substream(config.master_seed, drop_index, GEOMETRY_STREAM)
    drop = drop_users(rng, net, place_base_stations(net))
    sinr = {}
    excl = {}
    clamped = 0
    for template in config.models:
        accs, excl[template.label] = run_model_on_drop(drop, template, config, drop_index)
        for kind, acc in accs.items():
            s, bad = finalize_sinr(acc, drop.uplink_power, 1.0)
            sinr[(template.label, kind.value)] = s
            clamped += bad
    return DropResult(drop_index, sinr, excl, clamped, drop)


# Whole experiment


@dataclass
class SEReport:
    """Per-user SINR / SE samples of every (model, detector) pair.

    Arrays in ``sinr`` and ``se`` have shape (n_drops, L, K).
    """

    config: ExperimentConfig
    sinr: dict
    se: dict
    zf_exclusions: dict
    clamped: int
    workers: int = 1
    wall_time_s: float = 0.0
    drops: list = field(default_factory=list)

    def keys(self):
        return list(self.se)

    def values(self, model: str, detector: str) -> np.ndarray:
        return self.se[(model, DetectorKind.parse(detector).value)].ravel()

    def mean(self, model: str, detector: str) -> float:
        return float(np.mean(self.values(model, detector)))

    def likely95(self, model: str, detector: str) -> float:
        return fifth_percentile(self.values(model, detector))

    def summary(self) -> dict:
        return {
            key: {"mean": float(np.mean(v)), "likely95": fifth_percentile(v.ravel())}
            for key, v in self.se.items()
        }

    def rows(self):
        """Per-user rows: drop, cell, user, model, detector, S, d_l, sinr, se."""
        templates = {m.label: m for m in self.config.models}
        for (model, det), se in self.se.items():
            t = templates[model]
            sinr = self.sinr[(model, det)]
            for d, l, k in np.ndindex(se.shape):
                yield (d, l, k, model, det, t.S, t.d_l, float(sinr[d, l, k]), float(se[d, l, k]))


def aggregate_cdf(values):
    """Empirical CDF as (sorted distinct values, cumulative fraction)."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise DomainError("empty sample")
    x, counts = np.unique(v, return_counts=True)
    return x, np.cumsum(counts) / v.size


def fifth_percentile(values) -> float:
    """95%-likely value: 5th percentile, linear between order statistics."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("empty sample")
    return float(np.percentile(v, 5.0))


def run_experiment(config: ExperimentConfig, master_seed: int | None = None, workers: int | None = None) -> SEReport:
    """Run every drop and model of ``config`` and collect per-user SE."""
    if master_seed is not None:
        config = dataclasses.replace(config, master_seed=master_seed)
    if workers is not None:
        config = dataclasses.replace(config, workers=workers)
    t0 = time.perf_counter()
    indices = range(config.n_drops)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_drop, [config] * config.n_drops, indices))
    else:
        results = [run_drop(config, d) for d in indices]
    net = config.network
    sinr = {}
    se = {}
    for m in config.models:
        for det in config.detectors:
            key = (m.label, DetectorKind.parse(det).value)
            sinr[key] = np.stack([r.sinr[key] for r in results])
            se[key] = spectral_efficiency(sinr[key], config.tau_p, net.tau_c)
    excl = {m.label: sum(r.zf_exclusions[m.label] for r in results) for m in config.models}
    return SEReport(
        config=config,
        sinr=sinr,
        se=se,
        zf_exclusions=excl,
        clamped=sum(r.clamped for r in results),
        workers=config.workers,
        wall_time_s=time.perf_counter() - t0,
        drops=[r.geometry for r in results],
    )


