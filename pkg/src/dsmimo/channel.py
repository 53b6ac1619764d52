"""Small-scale fading models: uncorrelated Rayleigh and double scattering.

A double-scattering channel is

    h = sqrt(beta / S) * R^{1/2} G Rt^{1/2} g

with ``R`` (M x M) the correlation between the BS antennas and the transmit
scatterers, ``Rt`` (S x S) the correlation between the two scattering
clusters, and ``G``, ``g`` i.i.d. CN(0, 1). Antenna and scatterer spacings
are measured in carrier wavelengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import constants

from .errors import DomainError, NumericalError

DEFAULT_CARRIER_HZ = 2e9
DEFAULT_SCATTERER_SPACING = 10.0
DEFAULT_ANGULAR_SPREAD = 2.0 * np.pi / 3.0

_CHUNK = 10_000


def wavelength_m(carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    return constants.c / carrier_hz


def km_to_wavelengths(x_km, carrier_hz: float = DEFAULT_CARRIER_HZ):
    return np.asarray(x_km, dtype=float) * 1e3 / wavelength_m(carrier_hz)


def crandn(rng, *shape) -> np.ndarray:
    """Standard circular complex Gaussian samples, CN(0, 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class DoubleScatteringParams:
    """Geometry of one double-scattering link.

    ``d_l`` and ``d_S`` are in wavelengths; ``r_km`` is converted to
    wavelengths with ``carrier_hz`` wherever it meets ``d_S``.
    """

    S: int
    d_l: float
    d_S: float = DEFAULT_SCATTERER_SPACING
    theta: float = DEFAULT_ANGULAR_SPREAD
    alpha: float = 0.0
    r_km: float = 0.35
    beta_linear: float = 1.0
    carrier_hz: float = DEFAULT_CARRIER_HZ

    def __post_init__(self):
        if int(self.S) != self.S or self.S < 1 or self.S % 2 == 0:
            raise DomainError(f"S must be an odd positive integer, got {self.S}")
        if self.d_l < 0:
            raise DomainError("d_l must be nonnegative")
        if self.d_S < 0:
            raise DomainError("d_S must be nonnegative")
        if not 0 < self.theta <= 2 * np.pi:
            raise DomainError("theta must lie in (0, 2*pi]")
        if self.beta_linear <= 0:
            raise DomainError("beta must be positive")
        if self.r_km <= 0:
            raise DomainError("r must be positive")

    @property
    def r_wavelengths(self) -> float:
        return float(km_to_wavelengths(self.r_km, self.carrier_hz))


@dataclass(frozen=True)
class UncorrelatedRayleigh:
    beta_linear: float = 1.0


@dataclass(frozen=True)
class DoubleScattering:
    params: DoubleScatteringParams

    @property
    def beta_linear(self) -> float:
        return self.params.beta_linear


ChannelModelSpec = Union[UncorrelatedRayleigh, DoubleScattering]


def scatterer_angles(S: int, spread: float) -> np.ndarray:
    """Angles ``n * spread / (S - 1)`` for n = (1-S)/2, ..., (S-1)/2."""
    if S < 1:
        raise DomainError("S must be positive")
    if S == 1:
        return np.zeros(1)
    n = np.arange(S) - (S - 1) / 2.0
    return n * spread / (S - 1)


def scatterer_angle_spread(d_S: float, S: int, r: float) -> float:
    """Angle spread between the two clusters, ``2 atan(d_S (S-1) / (2 r))``.

    ``d_S`` and ``r`` must be in the same unit.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("cluster separation must be positive")
    out = 2.0 * np.arctan(d_S * max(S - 1, 0) / (2.0 * r))
    return float(out) if out.ndim == 0 else out


def steering_factor(n_elements: int, spacing: float, alpha, angles) -> np.ndarray:
    """Matrix ``A`` (n_elements x S) with ``A A^H`` the correlation matrix.

    Column n is the steering vector towards ``pi/2 + alpha + angles[n]``
    scaled by ``1/sqrt(S)``. ``alpha`` (...) and ``angles`` (..., S) may
    carry leading link dimensions; the result is then (..., n_elements, S).
    """
    angles = np.asarray(angles, dtype=float)
    alpha = np.asarray(alpha, dtype=float)[..., None]
    m = np.arange(n_elements)[:, None]
    c = np.cos(np.pi / 2 + alpha + angles)[..., None, :]
    return np.exp(-2j * np.pi * spacing * m * c) / np.sqrt(angles.shape[-1])


def bs_steering_factor(M: int, params: DoubleScatteringParams) -> np.ndarray:
    return steering_factor(M, params.d_l, params.alpha, scatterer_angles(params.S, params.theta))


def cluster_angle_spread(params: DoubleScatteringParams) -> float:
    return scatterer_angle_spread(params.d_S, params.S, params.r_wavelengths)


def scatterer_steering_factor(params: DoubleScatteringParams) -> np.ndarray:
    spread = cluster_angle_spread(params)
    return steering_factor(params.S, params.d_S, params.alpha, scatterer_angles(params.S, spread))


def bs_correlation_matrix(M: int, params: DoubleScatteringParams) -> np.ndarray:
    """BS-side correlation matrix R (M x M), unit diagonal, rank <= S."""
    A = bs_steering_factor(M, params)
    return A @ A.conj().T


def scatterer_correlation_matrix(params: DoubleScatteringParams) -> np.ndarray:
    """Correlation Rt (S x S) between the transmit and receive scatterers."""
    A = scatterer_steering_factor(params)
    return A @ A.conj().T


def matrix_sqrt_psd(A, herm_tol: float = 1e-10, neg_tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root of a PSD matrix via eigendecomposition.

    Eigenvalues in ``[-neg_tol * ||A||, 0)`` are clamped to zero; anything
    more negative is rejected.
    """
    A = np.asarray(A)
    scale = np.linalg.norm(A, 2) if A.size else 0.0
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NumericalError("matrix must be square")
    if np.max(np.abs(A - A.conj().T), initial=0.0) > herm_tol * max(scale, 1.0):
        raise NumericalError("matrix is not Hermitian")
    w, U = np.linalg.eigh((A + A.conj().T) / 2)
    if w.size and w.min() < -neg_tol * scale:
        raise NumericalError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


def sample_channel(rng, spec: ChannelModelSpec, M: int) -> np.ndarray:
    """One channel realization, drawn exactly as the model is written."""
    if isinstance(spec, UncorrelatedRayleigh):
        return np.sqrt(spec.beta_linear) * crandn(rng, M)
    p = spec.params
    R_half = matrix_sqrt_psd(bs_correlation_matrix(M, p))
    Rt_half = matrix_sqrt_psd(scatterer_correlation_matrix(p))
    G = crandn(rng, M, p.S)
    g = crandn(rng, p.S)
    return np.sqrt(p.beta_linear / p.S) * (R_half @ (G @ (Rt_half @ g)))


def sample_double_scattering_fast(rng, A, At, beta, n) -> np.ndarray:
    """``n`` double-scattering realizations from the steering factors.

    Conditioned on ``g``, ``G Rt^{1/2} g`` is CN(0, g^H Rt g I), so the model
    is equal in distribution to ``sqrt(beta/S) * ||At^H g|| * A u`` with
    ``u ~ CN(0, I_S)``. Needs only 2 S normals per realization.

    ``A`` may carry leading link dimensions: ``A`` (..., M, S), ``At``
    (..., S, S), ``beta`` broadcastable to ``A.shape[:-2]``. Returns
    (..., M, n).
    """
    A = np.asarray(A)
    At = np.asarray(At)
    S = A.shape[-1]
    lead = A.shape[:-2]
    g = crandn(rng, *lead, S, n)
    u = crandn(rng, *lead, S, n)
    scale = np.linalg.norm(np.conj(np.swapaxes(At, -1, -2)) @ g, axis=-2)  # (..., n)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), lead)
    h = A @ u
    h *= (np.sqrt(beta / S)[..., None] * scale)[..., None, :]
    return h


def channel_second_moment(spec: ChannelModelSpec, M: int) -> np.ndarray:
    """Closed-form E{h h^H}: beta I for Rayleigh, beta R for double scattering."""
    if isinstance(spec, UncorrelatedRayleigh):
        return spec.beta_linear * np.eye(M, dtype=complex)
    return spec.params.beta_linear * bs_correlation_matrix(M, spec.params)


def sample_many(rng, spec: ChannelModelSpec, M: int, n: int) -> np.ndarray:
    """``n`` independent realizations as an (n, M) array."""
    if isinstance(spec, UncorrelatedRayleigh):
        return np.sqrt(spec.beta_linear) * crandn(rng, n, M)
    p = spec.params
    h = sample_double_scattering_fast(
        rng, bs_steering_factor(M, p), scatterer_steering_factor(p), p.beta_linear, n
    )
    return h.T


def empirical_correlation(samples, beta: float = 1.0) -> np.ndarray:
    """Sample average of ``h h^H / beta`` over the rows of ``samples``."""
    H = np.atleast_2d(np.asarray(samples))
    if H.size == 0:
        raise DomainError("no samples")
    return (H.T @ H.conj()) / (H.shape[0] * beta)


def favorable_propagation_stat(rng, spec_k, spec_t, M: int, n: int) -> float:
    """Monte-Carlo estimate of E{|h_k^H h_t|} / (M sqrt(beta_k beta_t))."""
    total = 0.0
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        hk = sample_many(rng, spec_k, M, m)
        ht = sample_many(rng, spec_t, M, m)
        total += np.abs(np.einsum("nm,nm->n", hk.conj(), ht)).sum()
    return float(total / n / (M * np.sqrt(spec_k.beta_linear * spec_t.beta_linear)))
