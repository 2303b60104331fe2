"""Dense complex multiway arrays.

Tensors are plain C-ordered ``complex128`` numpy arrays, so the flat
index of element ``(m_1, ..., m_L)`` is the row-major one (last index
fastest) and reshaping to a vector never copies.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

ComplexTensor = np.ndarray


def _as_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if not shape or any(s <= 0 for s in shape):
        raise ValueError(f"extents must be positive, got {shape}")
    return shape


def tensor_from_vector(v, shape) -> ComplexTensor:
    """Reshape a length-M vector into a tensor of extents ``shape``."""
    v = np.asarray(v, dtype=np.complex128)
    shape = _as_shape(shape)
    if v.ndim != 1 or v.size != int(np.prod(shape)):
        raise ValueError(f"vector of length {v.size} does not fit shape {shape}")
    return np.ascontiguousarray(v).reshape(shape)


def vector_from_tensor(t: ComplexTensor) -> np.ndarray:
    return np.ascontiguousarray(t, dtype=np.complex128).reshape(-1)


def flat_index(index: Sequence[int], shape) -> int:
    """0-based flat position of a 0-based multi-index."""
    return int(np.ravel_multi_index(tuple(index), _as_shape(shape)))


def outer_product(factors: Sequence) -> ComplexTensor:
    """Outer product psi_1 x ... x psi_L of 1-D factors."""
    if len(factors) == 0:
        raise ValueError("outer product needs at least one factor")
    out = None
    for f in factors:
        f = np.asarray(f, dtype=np.complex128)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("factors must be non-empty vectors")
        out = f if out is None else np.multiply.outer(out, f)
    return np.ascontiguousarray(out)


def frobenius_norm(t: ComplexTensor) -> float:
    t = np.asarray(t)
    return float(np.linalg.norm(t.reshape(-1)))


def inner(a: ComplexTensor, b: ComplexTensor) -> complex:
    """<a, b> = sum conj(a) * b."""
    return complex(np.vdot(np.asarray(a).reshape(-1), np.asarray(b).reshape(-1)))


def mode_inner_products(t: ComplexTensor, probes, mode: int) -> ComplexTensor:
    """Contract mode ``mode`` of ``t`` against the conjugated probe columns.

    ``probes`` is ``M_mode x N``; the output has extent ``N`` on that mode
    and entry ``sum_m conj(probes[m, n]) * t[..., m, ...]``.
    """
    t = np.asarray(t, dtype=np.complex128)
    probes = np.asarray(probes, dtype=np.complex128)
    if probes.ndim == 1:
        probes = probes[:, None]
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for a {t.ndim}-way tensor")
    if probes.ndim != 2 or probes.shape[0] != t.shape[mode]:
        raise ValueError(
            f"probe rows {probes.shape[0]} != extent {t.shape[mode]} of mode {mode}"
        )
    out = np.tensordot(probes.conj(), t, axes=([0], [mode]))
    # tensordot puts the new axis first
    return np.ascontiguousarray(np.moveaxis(out, 0, mode))


def contract_all_modes(t: ComplexTensor, probes: Sequence) -> ComplexTensor:
    """Chain :func:`mode_inner_products` over every mode."""
    if len(probes) != np.ndim(t):
        raise ValueError(f"need {np.ndim(t)} probe matrices, got {len(probes)}")
    out = t
    for mode, p in enumerate(probes):
        out = mode_inner_products(out, p, mode)
    return out
