import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsmimo import channel as ch
from dsmimo.errors import DomainError, NumericalError


def direct_entry(dm, spacing, alpha, spread, S):
    """Independent oracle: one correlation entry by explicit summation."""
    total = 0
    for j in range(S):
        n = j - (S - 1) / 2
        angle = n * spread / (S - 1) if S > 1 else 0.0
        total += cmath.exp(-2j * math.pi * dm * spacing * math.cos(math.pi / 2 + alpha + angle))
    return total / S


def params(**kw):
    base = dict(S=21, d_l=0.5, d_S=10.0, theta=2 * math.pi / 3, alpha=0.0, r_km=0.35)
    base.update(kw)
    return ch.DoubleScatteringParams(**base)


def frob_rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# angles


def test_scatterer_angles_examples():
    a = ch.scatterer_angles(21, 2 * math.pi / 3)
    assert a[10] == 0.0  # n = 0
    assert a[20] == pytest.approx(math.pi / 3)  # n = 10
    np.testing.assert_array_equal(ch.scatterer_angles(1, 1.7), [0.0])


def test_angle_spread_examples():
    assert ch.scatterer_angle_spread(1.0, 21, 10.0) == pytest.approx(math.pi / 2)
    assert ch.scatterer_angle_spread(0.0, 21, 10.0) == 0.0
    assert ch.scatterer_angle_spread(10.0, 1, 10.0) == 0.0
    with pytest.raises(DomainError):
        ch.scatterer_angle_spread(1.0, 21, 0.0)


# correlation matrices


def test_bs_correlation_matches_direct_summation():
    R = ch.bs_correlation_matrix(4, params())
    # frozen from direct_entry(-1, 0.5, 0, 2 pi/3, 21)
    assert R[0, 1] == pytest.approx(-0.010913584703225317 - 8.987519723156029e-17j, abs=1e-14)
    for m in range(4):
        for mp in range(4):
            assert R[m, mp] == pytest.approx(direct_entry(m - mp, 0.5, 0.0, 2 * math.pi / 3, 21), abs=1e-12)


def test_scatterer_correlation_matches_direct_summation():
    p = params(alpha=0.3)
    spread = ch.cluster_angle_spread(p)
    assert spread == pytest.approx(0.08560267626260402, rel=1e-12)
    Rt = ch.scatterer_correlation_matrix(p)
    assert Rt[0, 1] == pytest.approx(0.1542443079876993 + 0.042033599435997986j, abs=1e-12)
    assert Rt[3, 7] == pytest.approx(direct_entry(-4, 10.0, 0.3, spread, 21), abs=1e-12)


def test_zero_spacing_gives_all_ones():
    np.testing.assert_allclose(ch.bs_correlation_matrix(6, params(d_l=0.0)), np.ones((6, 6)), atol=1e-14)
    np.testing.assert_allclose(ch.scatterer_correlation_matrix(params(d_S=0.0)), np.ones((21, 21)), atol=1e-14)


def test_keyhole_entries_unit_modulus():
    R = ch.bs_correlation_matrix(8, params(S=1))
    np.testing.assert_allclose(np.abs(R), 1.0, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(
    S=st.sampled_from([1, 3, 5, 11, 21]),
    d_l=st.floats(0.05, 5.0),
    alpha=st.floats(-math.pi, math.pi),
    theta=st.floats(0.01, 2 * math.pi),
    M=st.integers(1, 40),
)
def test_correlation_properties(S, d_l, alpha, theta, M):
    R = ch.bs_correlation_matrix(M, params(S=S, d_l=d_l, alpha=alpha, theta=theta))
    np.testing.assert_allclose(R, R.conj().T, atol=1e-12)
    np.testing.assert_allclose(np.diag(R).real, 1.0, atol=1e-12)
    w = np.linalg.eigvalsh(R)
    assert w.min() > -1e-10
    assert np.sum(w > 1e-8 * M) <= min(M, S)
    Rt = ch.scatterer_correlation_matrix(params(S=S, d_l=d_l, alpha=alpha, theta=theta))
    np.testing.assert_allclose(np.diag(Rt).real, 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(Rt).min() > -1e-10


def test_wider_spacing_raises_effective_rank():
    def eff_rank(R):
        w = np.linalg.eigvalsh(R)
        return w.sum() ** 2 / (w**2).sum()

    def off(R):
        return np.abs(R[~np.eye(len(R), dtype=bool)]).mean()

    tight = ch.bs_correlation_matrix(32, params(d_l=0.1))
    half = ch.bs_correlation_matrix(32, params(d_l=0.5))
    assert eff_rank(half) > eff_rank(tight)
    assert off(half) < off(tight)


def test_invalid_params():
    with pytest.raises(DomainError):
        params(S=4)
    with pytest.raises(DomainError):
        params(r_km=0.0)
    with pytest.raises(DomainError):
        params(theta=0.0)


# matrix square root


def test_sqrt_identity():
    np.testing.assert_allclose(ch.matrix_sqrt_psd(np.eye(5)), np.eye(5), atol=1e-14)


def test_sqrt_all_ones():
    A = np.ones((7, 7))
    B = ch.matrix_sqrt_psd(A)
    np.testing.assert_allclose(B @ B.conj().T, A, atol=1e-12)
    np.testing.assert_allclose(B, np.ones((7, 7)) / math.sqrt(7), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 30), rank=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_sqrt_reconstruction(n, rank, seed):
    rng = np.random.default_rng(seed)
    X = ch.crandn(rng, n, min(rank, n))
    A = X @ X.conj().T
    B = ch.matrix_sqrt_psd(A)
    assert frob_rel(B @ B.conj().T, A) <= 1e-8


def test_sqrt_rejects_bad_input():
    with pytest.raises(NumericalError):
        ch.matrix_sqrt_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NumericalError):
        ch.matrix_sqrt_psd(np.diag([1.0, -0.5]))


# sampling


def test_rayleigh_energy():
    rng = np.random.default_rng(0)
    h = ch.sample_many(rng, ch.UncorrelatedRayleigh(2.5), 16, 100_000)
    assert np.mean(np.sum(np.abs(h) ** 2, axis=1)) / (16 * 2.5) == pytest.approx(1.0, abs=0.01)


def test_second_moment_closed_form():
    np.testing.assert_allclose(ch.channel_second_moment(ch.UncorrelatedRayleigh(2.0), 4), 2 * np.eye(4))
    spec = ch.DoubleScattering(params(d_l=0.0, beta_linear=3.0))
    np.testing.assert_allclose(ch.channel_second_moment(spec, 5), 3 * np.ones((5, 5)), atol=1e-13)


def test_literal_sampler_second_moment():
    """Monte-Carlo oracle on the sampler written exactly as the model."""
    rng = np.random.default_rng(11)
    spec = ch.DoubleScattering(params(S=11, alpha=0.4, beta_linear=1.7))
    M = 8
    h = np.array([ch.sample_channel(rng, spec, M) for _ in range(40_000)])
    emp = h.T @ h.conj() / len(h)
    assert frob_rel(emp, ch.channel_second_moment(spec, M)) < 0.03


def test_fast_sampler_matches_literal_sampler_in_distribution():
    """Second and fourth moments of the fast path agree with the literal model."""
    spec = ch.DoubleScattering(params(S=5, alpha=0.2, d_S=1.0, r_km=0.01))
    M = 6
    n = 40_000
    rng = np.random.default_rng(5)
    lit = np.array([ch.sample_channel(rng, spec, M) for _ in range(n)])
    fast = ch.sample_many(np.random.default_rng(6), spec, M, n)
    for h in (lit, fast):
        assert frob_rel(h.T @ h.conj() / n, ch.channel_second_moment(spec, M)) < 0.03
    k_lit = np.mean(np.sum(np.abs(lit) ** 2, axis=1) ** 2)
    k_fast = np.mean(np.sum(np.abs(fast) ** 2, axis=1) ** 2)
    assert k_fast == pytest.approx(k_lit, rel=0.05)
    # non-Gaussian: E||h||^4 exceeds the Gaussian value with the same covariance
    R = ch.channel_second_moment(spec, M)
    gauss = np.trace(R).real ** 2 + np.trace(R @ R).real
    assert k_fast > 1.05 * gauss


def test_double_scattering_second_moment_fast():
    rng = np.random.default_rng(2)
    spec = ch.DoubleScattering(params(alpha=0.25, beta_linear=0.5))
    M = 32
    h = ch.sample_many(rng, spec, M, 100_000)
    assert frob_rel(ch.empirical_correlation(h, 0.5), ch.bs_correlation_matrix(M, spec.params)) < 0.03
    assert np.mean(np.sum(np.abs(h) ** 2, axis=1)) / (M * 0.5) == pytest.approx(1.0, abs=0.01)


def test_keyhole_collinear_with_steering():
    rng = np.random.default_rng(9)
    p = params(S=1, alpha=0.7)
    a = ch.bs_steering_factor(12, p)[:, 0]
    for _ in range(20):
        h = ch.sample_channel(rng, ch.DoubleScattering(p), 12)
        cos = abs(np.vdot(h, a)) / (np.linalg.norm(h) * np.linalg.norm(a))
        assert cos == pytest.approx(1.0, abs=1e-12)


def test_empirical_correlation():
    h = np.array([1 + 1j, 2.0, -1j])
    np.testing.assert_allclose(ch.empirical_correlation(h[None, :], 2.0), np.outer(h, h.conj()) / 2.0)
    with pytest.raises(DomainError):
        ch.empirical_correlation(np.zeros((0, 3)))


def test_empirical_correlation_rayleigh_vs_double_scattering():
    rng = np.random.default_rng(4)
    M = 32
    C = np.abs(ch.empirical_correlation(ch.sample_many(rng, ch.UncorrelatedRayleigh(), M, 100_000)))
    off = ~np.eye(M, dtype=bool)
    assert np.all(np.abs(np.diag(C) - 1) < 0.02)
    assert C[off].mean() <= 0.02
    D = np.abs(ch.empirical_correlation(ch.sample_many(rng, ch.DoubleScattering(params()), M, 20_000)))
    assert D[off].mean() > 0.05


def test_favorable_propagation_rayleigh_baseline():
    rng = np.random.default_rng(8)
    s = ch.favorable_propagation_stat(rng, ch.UncorrelatedRayleigh(), ch.UncorrelatedRayleigh(3.0), 100, 100_000)
    assert s == pytest.approx(math.sqrt(math.pi / 4) / 10, abs=0.003)


def test_favorable_propagation_brute_force():
    """Same statistic from an explicit loop over pairs."""
    M, n = 20, 20_000
    rng = np.random.default_rng(12)
    total = 0.0
    for _ in range(n):
        hk = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / math.sqrt(2)
        ht = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / math.sqrt(2)
        total += abs(np.vdot(hk, ht))
    brute = total / n / M
    fast = ch.favorable_propagation_stat(
        np.random.default_rng(13), ch.UncorrelatedRayleigh(), ch.UncorrelatedRayleigh(), M, n
    )
    assert fast == pytest.approx(brute, abs=0.005)


def test_favorable_propagation_aligned_keyhole():
    p = params(S=1)
    spec = ch.DoubleScattering(p)
    rng = np.random.default_rng(0)
    aligned = ch.favorable_propagation_stat(rng, spec, spec, 100, 5_000)
    assert aligned > 5 * math.sqrt(math.pi / 4) / 10
