"""Greedy decompositions: F-COMP, COMP, F-OMP and OMP.

All four share one loop (select, joint refit, residual update, then a
final parameter correction for the continuous variants). They differ in
the interpolation roles used (value only for the on-grid methods) and in
how correlations and Gram entries are obtained: the factorized backend
contracts the residual one mode at a time against the sub-atom tables,
the dense backend works on fully materialized atom columns.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import linalg
from .dictionary import InterpolatedDictionary, SeparableGrid
from .tensor import ComplexTensor, contract_all_modes, frobenius_norm, outer_product

log = logging.getLogger(__name__)

ALGORITHMS = ("omp", "fomp", "comp", "fcomp")


class DictionaryExhausted(RuntimeError):
    """Every grid node is already in the support."""


class DenseDictionary:
    """Interpolation atoms materialized as ``M x prod(N)`` column matrices.

    Column order is the row-major flat order of the grid nodes; row order
    is the row-major flat order of the tensor entries.
    """

    def __init__(self, d: InterpolatedDictionary):
        self.source = d
        self.grid = d.grid
        self.atom_shape = d.atom_shape
        self.n_interp = d.n_interp
        self.per_node_gram = d.per_node_gram
        self.atoms = np.stack([
            reduce(np.kron, [d.table(i, ax) for ax in range(d.ndim)])
            for i in range(d.n_interp)
        ])
        first = self.atoms[:, :, 0]
        self.gram = first.conj() @ first.T

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.grid.shape

    def column(self, role: int, node: Sequence[int]) -> np.ndarray:
        return self.atoms[role, :, np.ravel_multi_index(tuple(node), self.grid_shape)]

    def node_grams(self, roles: Sequence[int]) -> np.ndarray:
        a = self.atoms[list(roles)]
        g = np.einsum("imn,jmn->nij", a.conj(), a)
        return g.reshape(self.grid_shape + g.shape[1:])

    def whitener(self, roles: Sequence[int]) -> tuple[np.ndarray, bool]:
        roles = list(roles)
        return linalg.whitener(self.gram[np.ix_(roles, roles)])


# -- correlation backends ----------------------------------------------------

def factorized_correlations(R: ComplexTensor, d: InterpolatedDictionary, role: int) -> np.ndarray:
    """``<A^(role)[n], R>`` for every node, one mode contraction per axis."""
    R = np.asarray(R, dtype=np.complex128)
    if R.shape != d.atom_shape:
        raise ValueError(f"residual shape {R.shape} != atom shape {d.atom_shape}")
    return contract_all_modes(R, [d.table(role, ax) for ax in range(d.ndim)])


def dense_correlations(R: ComplexTensor, dense: DenseDictionary, role: int) -> np.ndarray:
    R = np.asarray(R, dtype=np.complex128)
    if R.shape != dense.atom_shape:
        raise ValueError(f"residual shape {R.shape} != atom shape {dense.atom_shape}")
    return (dense.atoms[role].conj().T @ R.reshape(-1)).reshape(dense.grid_shape)


def _correlations(R, dictionary, roles) -> np.ndarray:
    if isinstance(dictionary, DenseDictionary):
        return np.stack([dense_correlations(R, dictionary, i) for i in roles])
    return np.stack([factorized_correlations(R, dictionary, i) for i in roles])


def _energy(corr: np.ndarray, dictionary, roles) -> np.ndarray:
    """``Re(g^H G^-1 g)`` per node, ``corr`` shaped ``(I, *grid)``."""
    if dictionary.per_node_gram:
        grams = dictionary.node_grams(roles)
        g = np.moveaxis(corr, 0, -1)
        scaled, dd = linalg.equilibrate(grams)
        h = g * dd
        x = np.linalg.solve(scaled, h[..., None])[..., 0]
        return np.real(np.sum(h.conj() * x, axis=-1))
    w, _ = dictionary.whitener(roles)
    q = np.tensordot(w, corr, axes=([1], [0]))
    return np.sum(np.abs(q) ** 2, axis=0)


def selection_scores(R, dictionary, roles: Sequence[int] | None = None,
                     corr: np.ndarray | None = None) -> np.ndarray:
    """Per-node ``min_beta ||sum_i beta_i A^(i)[n] - R||_F^2``."""
    roles = list(range(dictionary.n_interp)) if roles is None else list(roles)
    if corr is None:
        corr = _correlations(R, dictionary, roles)
    return frobenius_norm(R) ** 2 - _energy(corr, dictionary, roles)


def select_atom(R, dictionary, mask=(), roles: Sequence[int] | None = None,
                corr: np.ndarray | None = None) -> tuple[tuple[int, ...], np.ndarray]:
    """Best unmasked node and the full score field.

    Ties go to the smallest row-major flat index.
    """
    scores = selection_scores(R, dictionary, roles, corr)
    masked = scores.copy()
    for node in mask:
        masked[tuple(node)] = np.inf
    if np.all(np.isinf(masked)):
        raise DictionaryExhausted("all grid nodes are masked")
    flat = int(np.argmin(masked))
    return tuple(int(i) for i in np.unravel_index(flat, scores.shape)), scores


# -- refit and residual ------------------------------------------------------

def _columns_factorized(d: InterpolatedDictionary, nodes, roles):
    """Per-axis factor matrices, one column per (node, role) pair."""
    return [
        np.stack([d.table(i, ax)[:, n[ax]] for n in nodes for i in roles], axis=1)
        for ax in range(d.ndim)
    ]


def joint_refit(Y, dictionary, nodes: Sequence[Sequence[int]],
                roles: Sequence[int] | None = None,
                y_corr: np.ndarray | None = None) -> tuple[np.ndarray, bool]:
    """Least-squares coefficients of ``Y`` on the selected interpolation atoms.

    Returns ``(beta, regularized)`` with ``beta`` shaped ``(k, I)``. The
    factorized backend builds the cross Gram as a product of per-axis
    Grams and reads the right-hand side from ``y_corr`` (the correlation
    field of ``Y``) when given.
    """
    roles = list(range(dictionary.n_interp)) if roles is None else list(roles)
    nodes = [tuple(n) for n in nodes]
    if len(set(nodes)) != len(nodes):
        raise ValueError("selected nodes must be distinct")
    k, ni = len(nodes), len(roles)
    if k == 0:
        return np.zeros((0, ni), dtype=np.complex128), False
    Y = np.asarray(Y, dtype=np.complex128)
    if isinstance(dictionary, DenseDictionary):
        phi = np.stack([dictionary.column(i, n) for n in nodes for i in roles], axis=1)
        gram = phi.conj().T @ phi
        rhs = phi.conj().T @ Y.reshape(-1)
    else:
        cols = _columns_factorized(dictionary, nodes, roles)
        gram = reduce(np.multiply, [c.conj().T @ c for c in cols])
        if y_corr is None:
            rhs = np.array([
                contract_all_modes(Y, [dictionary.table(i, ax)[:, n[ax]]
                                       for ax in range(dictionary.ndim)]).item()
                for n in nodes for i in roles
            ])
        else:
            rhs = np.array([y_corr[(j,) + n] for n in nodes for j in range(ni)])
    beta, reg = linalg.solve_normal(gram, rhs)
    return beta.reshape(k, ni), reg


def update_residual(Y, dictionary, nodes, betas, roles: Sequence[int] | None = None) -> ComplexTensor:
    """``Y - sum_k sum_i beta_k^(i) A^(i)[n_k]`` in the tensor domain."""
    roles = list(range(dictionary.n_interp)) if roles is None else list(roles)
    R = np.array(Y, dtype=np.complex128, copy=True)
    for n, b in zip(nodes, betas):
        for i, coef in zip(roles, b):
            if isinstance(dictionary, DenseDictionary):
                R -= coef * dictionary.column(i, n).reshape(R.shape)
            else:
                R -= coef * outer_product(dictionary.factors(i, n))
    return R


# -- parameter correction ----------------------------------------------------

def correct_parameters(beta, node: Sequence[int], grid: SeparableGrid) -> tuple[complex, np.ndarray, bool]:
    """Amplitude and off-grid parameters from raw Taylor coefficients.

    ``alpha = beta[0]`` and the offset on axis ``l`` is
    ``Re(beta[l + 1] / beta[0])`` clipped to half a grid step. A vanishing
    ``beta[0]`` returns the node itself and ``degenerate=True``.
    """
    beta = np.asarray(beta, dtype=np.complex128)
    center = grid.point(node)
    if abs(beta[0]) < 1e-14 * np.linalg.norm(beta) or np.linalg.norm(beta) == 0:
        return complex(beta[0]), center, True
    half = grid.steps / 2
    offsets = np.clip(np.real(beta[1:] / beta[0]), -half, half)
    return complex(beta[0]), center + offsets, False


# -- solution container and drivers -----------------------------------------

@dataclass
class Component:
    amplitude: complex
    params: np.ndarray
    node: tuple[int, ...]
    beta: np.ndarray
    degenerate: bool = False


@dataclass
class SparseSolution:
    components: list[Component]
    residual_norms: list[float]
    timings: dict[str, int] = field(default_factory=dict)
    residual: np.ndarray | None = None
    regularized: bool = False
    truncated: bool = False

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.amplitude for c in self.components], dtype=np.complex128)

    @property
    def params(self) -> np.ndarray:
        return np.array([c.params for c in self.components])

    @property
    def nodes(self) -> list[tuple[int, ...]]:
        return [c.node for c in self.components]

    @property
    def betas(self) -> np.ndarray:
        return np.array([c.beta for c in self.components])


def _greedy(Y, dictionary, K: int, roles: Sequence[int], continuous: bool) -> SparseSolution:
    if K < 1:
        raise ValueError("K must be at least 1")
    Y = np.asarray(Y, dtype=np.complex128)
    if Y.shape != tuple(dictionary.atom_shape):
        raise ValueError(f"measurement shape {Y.shape} != atom shape {dictionary.atom_shape}")
    roles = list(roles)
    factorized = not isinstance(dictionary, DenseDictionary)
    clock = time.perf_counter_ns
    timings = {"select": 0, "refit": 0, "correct": 0}
    t_start = clock()

    t0 = clock()
    y_corr = _correlations(Y, dictionary, roles)
    timings["select"] += clock() - t0

    R = Y
    nodes: list[tuple[int, ...]] = []
    betas = np.zeros((0, len(roles)), dtype=np.complex128)
    norms = [frobenius_norm(Y)]
    regularized = truncated = False
    for k in range(K):
        t0 = clock()
        try:
            corr = y_corr if k == 0 else None
            node, _ = select_atom(R, dictionary, nodes, roles, corr)
        except DictionaryExhausted:
            log.warning("dictionary exhausted after %d components", k)
            truncated = True
            break
        nodes.append(node)
        t1 = clock()
        betas, reg = joint_refit(Y, dictionary, nodes, roles,
                                 y_corr if factorized else None)
        regularized |= reg
        R = update_residual(Y, dictionary, nodes, betas, roles)
        norms.append(frobenius_norm(R))
        t2 = clock()
        timings["select"] += t1 - t0
        timings["refit"] += t2 - t1

    t0 = clock()
    grid = dictionary.grid
    comps = []
    for node, b in zip(nodes, betas):
        if continuous:
            alpha, p, degen = correct_parameters(b, node, grid)
        else:
            alpha, p, degen = complex(b[0]), grid.point(node), False
        comps.append(Component(alpha, p, node, b, degen))
    timings["correct"] = clock() - t0
    timings["total"] = clock() - t_start
    return SparseSolution(comps, norms, timings, R, regularized, truncated)


def fcomp(Y, d: InterpolatedDictionary, K: int) -> SparseSolution:
    """Factorized continuous OMP over all ``L + 1`` interpolation roles."""
    return _greedy(Y, d, K, range(d.n_interp), continuous=True)


def comp(Y, dense: DenseDictionary, K: int) -> SparseSolution:
    """Continuous OMP on materialized atoms."""
    return _greedy(Y, dense, K, range(dense.n_interp), continuous=True)


def fomp(Y, d: InterpolatedDictionary, K: int) -> SparseSolution:
    """Factorized on-grid OMP (value atoms only)."""
    return _greedy(Y, d, K, [0], continuous=False)


def omp(Y, dense: DenseDictionary, K: int) -> SparseSolution:
    return _greedy(Y, dense, K, [0], continuous=False)


SOLVERS = {"omp": omp, "fomp": fomp, "comp": comp, "fcomp": fcomp}


def solve(algo: str, Y, d: InterpolatedDictionary, K: int,
          dense: DenseDictionary | None = None) -> SparseSolution:
    """Run ``algo`` by name; dense variants build ``dense`` if not given."""
    if algo not in SOLVERS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    if algo in ("omp", "comp"):
        return SOLVERS[algo](Y, dense if dense is not None else DenseDictionary(d), K)
    return SOLVERS[algo](Y, d, K)
