"""Channel diagnostics: normalized correlation maps and favorable propagation."""

from __future__ import annotations

import numpy as np

from . import channel as ch
from .config import ModelTemplate

#: Reference cluster separation for single-link diagnostics (0.7 x 0.5 km).
REFERENCE_R_KM = 0.35


def model_spec(label: str, M: int, alpha: float = 0.0, d_S=ch.DEFAULT_SCATTERER_SPACING,
               theta=ch.DEFAULT_ANGULAR_SPREAD, carrier_hz=ch.DEFAULT_CARRIER_HZ):
    """Unit-beta single-link spec from a model label (``rayleigh``, ``ds-S21-dl0.5``)."""
    t = ModelTemplate.parse(label)
    if t.kind == "rayleigh":
        return ch.UncorrelatedRayleigh(1.0)
    return ch.DoubleScattering(
        ch.DoubleScatteringParams(
            S=t.S, d_l=t.d_l, d_S=d_S, theta=theta, alpha=alpha,
            r_km=REFERENCE_R_KM, beta_linear=1.0, carrier_hz=carrier_hz,
        )
    )


def correlation_map(rng, spec, M: int, n: int, chunk: int = 10_000) -> np.ndarray:
    """Magnitude of the empirical E{h h^H} / beta over ``n`` realizations."""
    acc = np.zeros((M, M), dtype=complex)
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        h = ch.sample_many(rng, spec, M, m)
        acc += h.T @ h.conj()
    return np.abs(acc / (n * spec.beta_linear))


def fp_angles(step: float = np.pi / 20) -> np.ndarray:
    """Azimuth grid over [-pi, pi] inclusive."""
    n = int(round(2 * np.pi / step))
    return np.linspace(-np.pi, np.pi, n + 1)


def fp_curve(rng, label: str, M: int, n: int, angles=None, **kw):
    """Favorable-propagation statistic vs. the azimuth of the second user.

    The first user stays at azimuth 0.
    """
    angles = fp_angles() if angles is None else np.asarray(angles)
    spec_k = model_spec(label, M, 0.0, **kw)
    stats = np.array([
        ch.favorable_propagation_stat(rng, spec_k, model_spec(label, M, float(a), **kw), M, n)
        for a in angles
    ])
    return angles, stats
