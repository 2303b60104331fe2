"""Hermitian normal-equation solves with a Tikhonov fallback."""
from __future__ import annotations

import numpy as np

COND_LIMIT = 1e12
TIKHONOV_SCALE = 1e-10


def equilibrate(gram: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(D^-1/2 G D^-1/2, d)`` with ``d = diag(G)^-1/2``.

    Interpolation atoms carry wildly different norms (derivative atoms
    scale with the sub-atom phase rate), so every solve is done on the
    unit-diagonal version of the Gram.
    """
    diag = np.real(np.diagonal(gram, axis1=-2, axis2=-1)).copy()
    diag[diag <= 0] = 1.0
    d = 1.0 / np.sqrt(diag)
    return gram * d[..., :, None] * d[..., None, :], d


def regularize(gram: np.ndarray) -> tuple[np.ndarray, bool]:
    """Add ``1e-10 * trace / n`` to the diagonal when ``cond > 1e12``."""
    n = gram.shape[-1]
    cond = np.linalg.cond(gram)
    if np.isfinite(cond) and cond <= COND_LIMIT:
        return gram, False
    lam = TIKHONOV_SCALE * np.real(np.trace(gram)) / n
    return gram + lam * np.eye(n), True


def solve_normal(gram: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``G x = b`` for Hermitian PSD ``G``; flag if regularized."""
    scaled, d = equilibrate(gram)
    scaled, reg = regularize(scaled)
    x = np.linalg.solve(scaled, d[:, None] * rhs.reshape(len(d), -1))
    return (d[:, None] * x).reshape(rhs.shape), reg


def whitener(gram: np.ndarray) -> tuple[np.ndarray, bool]:
    """Matrix ``W`` with ``||W g||^2 = g^H G^-1 g`` (equilibrated Cholesky)."""
    scaled, d = equilibrate(gram)
    scaled, reg = regularize(scaled)
    chol = np.linalg.cholesky(scaled)
    w = np.linalg.solve(chol, np.eye(len(d)))
    return w * d[None, :], reg
