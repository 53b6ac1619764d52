"""Pilot reuse and LMMSE channel estimation under pilot contamination.

Channel tensors use the layout ``H[..., i, k, l, :]``: the M-vector from user
``k`` of cell ``i`` to BS ``l``, optionally with leading realization axes.
Cells are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import crandn
from .errors import ConfigError, DomainError, NumericalError


@dataclass(frozen=True)
class PilotPlan:
    tau_p: int
    f: int
    pilot_class: tuple  # pilot_class[l] = class index of cell l
    groups: tuple  # groups[l] = sorted tuple of co-pilot cells of l

    @property
    def L(self) -> int:
        return len(self.pilot_class)

    @property
    def K(self) -> int:
        return self.tau_p // self.f

    def copilot_mask(self) -> np.ndarray:
        """Boolean (L, L) matrix, ``mask[l, i]`` true when i is in P_l."""
        cls = np.asarray(self.pilot_class)
        return cls[:, None] == cls[None, :]


def build_pilot_plan(L: int, K: int, f: int, tau_c: int | None = None) -> PilotPlan:
    """Round-robin assignment of cells to ``f`` pilot classes, tau_p = f K."""
    if int(f) != f or f < 1:
        raise ConfigError("pilot reuse factor must be a positive integer", key="f")
    tau_p = f * K
    if tau_c is not None and tau_p > tau_c:
        raise ConfigError(f"f*K = {tau_p} exceeds tau_c = {tau_c}", key="f")
    cls = tuple(l % f for l in range(L))
    groups = tuple(tuple(i for i in range(L) if cls[i] == cls[l]) for l in range(L))
    return PilotPlan(tau_p=tau_p, f=f, pilot_class=cls, groups=groups)


def despread_pilots(rng, channels, plan: PilotPlan, powers, noise_var, noise=None):
    """De-spread pilot statistic ``y[..., l, k, :]`` for every BS and pilot.

    ``y_{l,k} = sum_{i in P_l} sqrt(p_{i,k}) tau_p h_{i,k}^l + n`` with
    n ~ CN(0, tau_p noise_var I). ``noise`` overrides the random draw and
    must have the shape of the output.
    """
    H = np.asarray(channels)
    L, K, M = H.shape[-4], H.shape[-3], H.shape[-1]
    lead = H.shape[:-4]
    amp = np.sqrt(np.broadcast_to(np.asarray(powers, dtype=float), (L, K))) * plan.tau_p
    mask = plan.copilot_mask().astype(float)  # [l, i]
    # sum over i of mask[l, i] * amp[i, k] * H[..., i, k, l, :]
    y = np.einsum("li,ik,...ikls->...lks", mask, amp, H)
    if noise is None:
        if noise_var > 0:
            noise = np.sqrt(plan.tau_p * noise_var) * crandn(rng, *lead, L, K, M)
        else:
            noise = 0.0
    return y + noise


@dataclass
class LmmseFilter:
    """Per-user LMMSE filters ``B[l, k]`` = C_hy C_yy^{-1} (M x M)."""

    B: np.ndarray  # (L, K, M, M)
    C_hy: np.ndarray
    C_yy: np.ndarray

    def apply(self, y) -> np.ndarray:
        """Estimates ``B[l, k] y[..., l, k, :]`` with the same layout as ``y``."""
        return np.einsum("lkab,...lkb->...lka", self.B, np.asarray(y))


def lmmse_filter(second_moments, plan: PilotPlan, powers, noise_var) -> LmmseFilter:
    """Build the LMMSE filter of every user from closed-form second moments.

    ``second_moments[i, k, l]`` is E{h_{i,k}^l (h_{i,k}^l)^H} (M x M).
    """
    Rm = np.asarray(second_moments)
    L, K, _, M, _ = Rm.shape
    p = np.broadcast_to(np.asarray(powers, dtype=float), (L, K))
    tau = plan.tau_p
    B = np.empty((L, K, M, M), dtype=complex)
    C_hy = np.empty_like(B)
    C_yy = np.empty_like(B)
    eye = np.eye(M)
    for l in range(L):
        for k in range(K):
            cyy = tau * noise_var * eye + sum(
                tau**2 * p[i, k] * Rm[i, k, l] for i in plan.groups[l]
            )
            chy = np.sqrt(p[l, k]) * tau * Rm[l, k, l]
            try:
                c = scipy.linalg.cho_factor(cyy, lower=True)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"pilot covariance of user {k} in cell {l} is not positive definite"
                ) from exc
            # B = chy cyy^{-1}; both Hermitian so B^H = cyy^{-1} chy
            B[l, k] = scipy.linalg.cho_solve(c, chy).conj().T
            C_hy[l, k] = chy
            C_yy[l, k] = cyy
    return LmmseFilter(B=B, C_hy=C_hy, C_yy=C_yy)


def estimate_channels(filt: LmmseFilter, despread) -> np.ndarray:
    """Channel estimates stacked per cell, shape (..., L, M, K)."""
    y = np.asarray(despread)
    if y.shape[-3:] != filt.B.shape[:2] + (filt.B.shape[-1],):
        raise DomainError(
            f"despread shape {y.shape[-3:]} does not match filter {filt.B.shape[:3]}"
        )
    return np.swapaxes(filt.apply(y), -1, -2)


# Explicit pilot matrices, for cross-checking the de-spread shortcut.


def pilot_matrices(plan: PilotPlan) -> np.ndarray:
    """Pilot matrix of every cell, shape (L, tau_p, K), Phi^H Phi = tau_p I.

    Columns are taken from the tau_p-point DFT matrix; pilot class c uses
    columns c K, ..., c K + K - 1.
    """
    tau, K = plan.tau_p, plan.K
    F = np.exp(-2j * np.pi * np.outer(np.arange(tau), np.arange(tau)) / tau)
    return np.stack([F[:, c * K : (c + 1) * K] for c in plan.pilot_class])


def receive_pilots(rng, channels, plan: PilotPlan, powers, noise_var, noise=None):
    """Received pilot matrices ``Y[l]`` (M x tau_p) of every BS."""
    H = np.asarray(channels)  # (L, K, L, M)
    L, K, _, M = H.shape
    Phi = pilot_matrices(plan)
    p = np.broadcast_to(np.asarray(powers, dtype=float), (L, K))
    if noise is None:
        noise = np.sqrt(noise_var) * crandn(rng, L, M, plan.tau_p)
    Y = np.empty((L, M, plan.tau_p), dtype=complex)
    for l in range(L):
        Y[l] = noise[l] + sum(
            H[i, :, l, :].T @ np.diag(np.sqrt(p[i])) @ Phi[i].conj().T for i in range(L)
        )
    return Y


def despread_from_received(Y, plan: PilotPlan) -> np.ndarray:
    """``y[l, k] = Y[l] phi_{l,k}`` for every BS and pilot, shape (L, K, M)."""
    Phi = pilot_matrices(plan)
    return np.einsum("lmt,ltk->lkm", np.asarray(Y), Phi)
