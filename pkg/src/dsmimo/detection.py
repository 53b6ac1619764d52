"""MR, ZF and MMSE linear detection matrices."""

from __future__ import annotations

import enum

import numpy as np

from .errors import DomainError, SingularityError

#: Gram matrices with a larger 2-norm condition number are treated as singular.
ZF_COND_LIMIT = 1e12


class DetectorKind(str, enum.Enum):
    MR = "mr"
    ZF = "zf"
    MMSE = "mmse"

    @classmethod
    def parse(cls, name) -> "DetectorKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise DomainError(f"unknown detector {name!r}") from None


def gram(H_hat) -> np.ndarray:
    H = np.asarray(H_hat)
    return np.swapaxes(H.conj(), -1, -2) @ H


def ill_conditioned(G) -> np.ndarray:
    """Mask of Gram matrices whose condition number exceeds the ZF limit."""
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.linalg.cond(G)
    return ~(c <= ZF_COND_LIMIT)


def detector_matrix(H_hat, powers, kind, G=None, check=True) -> np.ndarray:
    """Detection matrix V (..., M, K) from the estimates Ĥ (..., M, K).

    MR: V = Ĥ. ZF: V = Ĥ (ĤᴴĤ)^{-1}. MMSE: V = Ĥ (ĤᴴĤ + P^{-1})^{-1}, with
    ``powers`` the diagonal of P (noise-normalized). A precomputed Gram
    matrix ``G`` can be shared between ZF and MMSE. With ``check`` a
    singular ZF Gram raises :class:`SingularityError`; without it, callers
    are expected to screen realizations with :func:`ill_conditioned`.
    """
    kind = DetectorKind.parse(kind)
    H = np.asarray(H_hat)
    K = H.shape[-1]
    if kind is DetectorKind.MR:
        return H.copy()
    if G is None:
        G = gram(H)
    if kind is DetectorKind.ZF:
        if K > H.shape[-2]:
            raise SingularityError(f"ZF needs K <= M (K={K}, M={H.shape[-2]})")
        bad = ill_conditioned(G)
        if check and np.any(bad):
            raise SingularityError("Gram matrix is singular to working precision")
        if np.any(bad):
            G = np.where(bad[..., None, None], np.eye(K), G)
        A = G
    else:
        p = np.broadcast_to(np.asarray(powers, dtype=float), H.shape[:-2] + (K,))
        if np.any(p <= 0):
            raise DomainError("MMSE detection needs positive powers")
        A = G + np.einsum("...k,kj->...kj", 1.0 / p, np.eye(K))
    # V = H A^{-1}  <=>  V^H = A^{-H} H^H = A^{-1} H^H (A Hermitian)
    Vh = np.linalg.solve(A, np.swapaxes(H.conj(), -1, -2))
    return np.swapaxes(Vh.conj(), -1, -2)
