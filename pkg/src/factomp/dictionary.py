"""Separable grids, sub-atom generators and the order-1 Taylor dictionary.

Interpolation roles are numbered from 0: role 0 is the value atom
``psi_1(w_1) x ... x psi_L(w_L)`` and role ``l + 1`` swaps factor ``l``
for its parameter derivative, giving ``I = L + 1`` atoms per node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import linalg
from .tensor import ComplexTensor, outer_product


@dataclass(frozen=True)
class ParameterDomain:
    """Box ``[lo_1, hi_1] x ... x [lo_L, hi_L]``."""

    axes: tuple[tuple[float, float], ...]

    def __post_init__(self):
        axes = tuple((float(lo), float(hi)) for lo, hi in self.axes)
        if not axes:
            raise ValueError("domain needs at least one axis")
        for lo, hi in axes:
            if not lo < hi:
                raise ValueError(f"empty axis interval [{lo}, {hi}]")
        object.__setattr__(self, "axes", axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def contains(self, p) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(p, self.axes))


@dataclass(frozen=True)
class SeparableGrid:
    """Per-axis uniformly spaced nodes."""

    nodes: tuple[np.ndarray, ...]

    def __post_init__(self):
        nodes = tuple(np.asarray(n, dtype=float).copy() for n in self.nodes)
        for n in nodes:
            if n.ndim != 1 or n.size < 2:
                raise ValueError("each axis needs at least two nodes")
            d = np.diff(n)
            if np.any(d <= 0):
                raise ValueError("nodes must be strictly increasing")
            if np.max(np.abs(d - d[0])) > 1e-12 * abs(d[0]) * n.size:
                raise ValueError("nodes must be uniformly spaced")
            n.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, domain: ParameterDomain, counts: Sequence[int]) -> "SeparableGrid":
        """Cell-centred nodes ``lo + (n + 1/2) (hi - lo) / N``."""
        if len(counts) != domain.ndim:
            raise ValueError("one node count per axis required")
        return cls(tuple(lo + (np.arange(n) + 0.5) * (hi - lo) / n
                         for (lo, hi), n in zip(domain.axes, counts)))

    @property
    def ndim(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n.size for n in self.nodes)

    @property
    def steps(self) -> np.ndarray:
        return np.array([n[1] - n[0] for n in self.nodes])

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def point(self, node: Sequence[int]) -> np.ndarray:
        self.check_node(node)
        return np.array([ax[i] for ax, i in zip(self.nodes, node)])

    def nearest(self, p) -> tuple[int, ...]:
        return tuple(int(np.argmin(np.abs(ax - x))) for ax, x in zip(self.nodes, p))

    def check_node(self, node: Sequence[int]) -> None:
        if len(node) != self.ndim or any(
            not 0 <= int(i) < n for i, n in zip(node, self.shape)
        ):
            raise IndexError(f"node {tuple(node)} outside grid of shape {self.shape}")


class SubAtomGenerator(Protocol):
    """One axis of a factorizable dictionary."""

    size: int

    def __call__(self, p: float) -> np.ndarray: ...

    def derivative(self, p: float) -> np.ndarray: ...


@dataclass(frozen=True)
class ExponentialSubAtom:
    """``psi(p)_m = exp(-j * rate * p * m)`` over a fixed index set."""

    rate: float
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)

    def __call__(self, p):
        return np.exp(-1j * self.rate * np.multiply.outer(p, self.indices))

    def derivative(self, p):
        return (-1j * self.rate * self.indices) * self(p)


def _table(fn, nodes) -> np.ndarray:
    # columns are the sub-atoms at each node
    return np.ascontiguousarray(np.stack([fn(w) for w in nodes], axis=1), dtype=np.complex128)


@dataclass
class InterpolatedDictionary:
    """Precomputed value/derivative sub-atom tables and interpolation Gram."""

    generators: tuple
    grid: SeparableGrid
    values: tuple[np.ndarray, ...]
    derivatives: tuple[np.ndarray, ...]
    per_node_gram: bool = False
    gram: np.ndarray = field(init=False)

    def __post_init__(self):
        self.gram = self.gram_at((0,) * self.ndim)

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def n_interp(self) -> int:
        return self.ndim + 1

    @property
    def atom_shape(self) -> tuple[int, ...]:
        return tuple(t.shape[0] for t in self.values)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.grid.shape

    def table(self, role: int, axis: int) -> np.ndarray:
        """``M_axis x N_axis`` table of the factor used by ``role`` on ``axis``."""
        if not 0 <= role < self.n_interp:
            raise ValueError(f"role {role} outside [0, {self.n_interp})")
        return self.derivatives[axis] if role == axis + 1 else self.values[axis]

    def factors(self, role: int, node: Sequence[int]) -> list[np.ndarray]:
        self.grid.check_node(node)
        return [self.table(role, ax)[:, n] for ax, n in enumerate(node)]

    def atom(self, role: int, node: Sequence[int]) -> ComplexTensor:
        return outer_product(self.factors(role, node))

    def axis_grams(self, roles: Sequence[int], axis: int) -> np.ndarray:
        """Per-node ``<factor_i, factor_j>`` on one axis, shape ``(N, I, I)``."""
        cols = np.stack([self.table(r, axis) for r in roles], axis=0)
        return np.einsum("imn,jmn->nij", cols.conj(), cols)

    def gram_at(self, node: Sequence[int], roles: Sequence[int] | None = None) -> np.ndarray:
        roles = range(self.n_interp) if roles is None else roles
        self.grid.check_node(node)
        g = 1.0
        for ax, n in enumerate(node):
            g = g * self.axis_grams(roles, ax)[n]
        return np.asarray(g)

    def node_grams(self, roles: Sequence[int]) -> np.ndarray:
        """Gram at every node, shape ``(N_1, ..., N_L, I, I)``."""
        roles = list(roles)
        out = np.ones(self.grid_shape + (len(roles), len(roles)), dtype=np.complex128)
        for ax in range(self.ndim):
            g = self.axis_grams(roles, ax)
            idx = [None] * self.ndim
            idx[ax] = slice(None)
            out = out * g[tuple(idx)]
        return out

    def whitener(self, roles: Sequence[int]) -> tuple[np.ndarray, bool]:
        roles = list(roles)
        return linalg.whitener(self.gram[np.ix_(roles, roles)])


def build_interpolated_dictionary(
    generators: Sequence[SubAtomGenerator],
    grid: SeparableGrid,
    per_node_gram: bool = False,
) -> InterpolatedDictionary:
    """Tabulate sub-atoms and their derivatives at every grid node.

    ``per_node_gram`` keeps one Gram per node for dictionaries whose
    interpolation Gram depends on the node; the default reuses the Gram
    of the first node everywhere, which is exact for exponential sub-atoms.
    """
    if len(generators) != grid.ndim:
        raise ValueError(f"{len(generators)} generators for a {grid.ndim}-axis grid")
    values = tuple(_table(g, w) for g, w in zip(generators, grid.nodes))
    derivs = tuple(_table(g.derivative, w) for g, w in zip(generators, grid.nodes))
    return InterpolatedDictionary(tuple(generators), grid, values, derivs, per_node_gram)


def coefficient_function(grid: SeparableGrid, node: Sequence[int], p) -> np.ndarray:
    """Order-1 Taylor coefficients ``(1, p_1 - w_1, ..., p_L - w_L)``."""
    offsets = np.asarray(p, dtype=float) - grid.point(node)
    return np.concatenate([[1.0], offsets]).astype(np.complex128)


def interpolate_atom(d: InterpolatedDictionary, node: Sequence[int], p) -> ComplexTensor:
    c = coefficient_function(d.grid, node, p)
    out = c[0] * d.atom(0, node)
    for i in range(1, d.n_interp):
        out = out + c[i] * d.atom(i, node)
    return out


def exact_atom(generators: Sequence[SubAtomGenerator], p) -> ComplexTensor:
    if len(generators) != len(p):
        raise ValueError("one parameter per generator required")
    return outer_product([g(x) for g, x in zip(generators, p)])
