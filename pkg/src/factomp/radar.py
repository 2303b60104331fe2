"""FMCW chirp radar model: sub-atoms, synthesis, scenes and the miss metric.

The measurement tensor is ``Ms x Mc`` (fast time, slow time). Axis 0 of
the parameter space is the coupled range ``r' = r + (f0 Ms Ts / B) v``
and axis 1 is the radial speed ``v``; in these coordinates the model is
exactly separable.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dictionary import (ExponentialSubAtom, InterpolatedDictionary, ParameterDomain,
                         SeparableGrid, build_interpolated_dictionary)
from .tensor import ComplexTensor, outer_product

SPEED_OF_LIGHT = 299_792_458.0


class InfeasibleScene(RuntimeError):
    pass


def sample_indices(count: int, base: str) -> np.ndarray:
    """Sample index set: ``"one"`` is ``1..M``, ``"centered"`` is ``-M//2..M-M//2-1``."""
    if base == "one":
        return np.arange(1, count + 1, dtype=float)
    if base == "centered":
        return np.arange(count, dtype=float) - count // 2
    raise ValueError(f"unknown index base {base!r}")


@dataclass(frozen=True)
class RadarConfig:
    B: float = 200e6
    f0: float = 24e9
    Ts: float = 5e-6
    Ms: int = 16
    Mc: int = 16
    c: float = SPEED_OF_LIGHT
    # phase reference of the sample index; see sample_indices
    index_base: str = "centered"

    def __post_init__(self):
        for name in ("B", "f0", "Ts", "Ms", "Mc", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        sample_indices(1, self.index_base)

    @property
    def Tc(self) -> float:
        return self.Ms * self.Ts

    @property
    def coupling(self) -> float:
        """Apparent range shift per unit speed, ``f0 Ms Ts / B`` (seconds)."""
        return self.f0 * self.Ms * self.Ts / self.B

    @property
    def range_rate(self) -> float:
        return 4 * math.pi * self.B / (self.Ms * self.c)

    @property
    def velocity_rate(self) -> float:
        return 4 * math.pi * self.f0 * self.Ms * self.Ts / self.c

    @property
    def range_period(self) -> float:
        """Unambiguous coupled-range span ``Ms c / 2B``."""
        return self.Ms * self.c / (2 * self.B)

    @property
    def velocity_period(self) -> float:
        return self.c / (2 * self.f0 * self.Ms * self.Ts)

    @property
    def range_cell(self) -> float:
        return self.c / (2 * self.B)

    @property
    def velocity_cell(self) -> float:
        return self.c / (4 * self.f0 * self.Mc * self.Tc)

    def domain(self) -> ParameterDomain:
        v = self.velocity_period / 2
        return ParameterDomain(((0.0, self.range_period), (-v, v)))

    def generators(self) -> tuple[ExponentialSubAtom, ExponentialSubAtom]:
        return (ExponentialSubAtom(self.range_rate, sample_indices(self.Ms, self.index_base)),
                ExponentialSubAtom(self.velocity_rate, sample_indices(self.Mc, self.index_base)))

    def grid(self, n_range: int, n_velocity: int | None = None) -> SeparableGrid:
        return SeparableGrid.uniform(self.domain(), (n_range, n_velocity or n_range))

    def dictionary(self, n_range: int, n_velocity: int | None = None) -> InterpolatedDictionary:
        return build_interpolated_dictionary(self.generators(), self.grid(n_range, n_velocity))

    def to_dict(self) -> dict:
        return asdict(self)


def range_sub_atom(r_coupled: float, cfg: RadarConfig) -> np.ndarray:
    return cfg.generators()[0](r_coupled)


def range_sub_atom_derivative(r_coupled: float, cfg: RadarConfig) -> np.ndarray:
    return cfg.generators()[0].derivative(r_coupled)


def velocity_sub_atom(v: float, cfg: RadarConfig) -> np.ndarray:
    return cfg.generators()[1](v)


def velocity_sub_atom_derivative(v: float, cfg: RadarConfig) -> np.ndarray:
    return cfg.generators()[1].derivative(v)


def coupled_range(r, v, cfg: RadarConfig):
    return r + cfg.coupling * v


def decouple(r_coupled, v, cfg: RadarConfig):
    return r_coupled - cfg.coupling * v


def wrap_range(r, cfg: RadarConfig):
    """Fold a range into ``[0, range_period)``; the sub-atoms cannot tell them apart."""
    return np.mod(r, cfg.range_period)


@dataclass
class Target:
    r: float
    v: float
    amp: complex = 1.0


@dataclass
class Scene:
    targets: list[Target] = field(default_factory=list)
    noise_sigma: float = 0.0

    @property
    def K(self) -> int:
        return len(self.targets)


def synthesize_measurement(scene: Scene, cfg: RadarConfig,
                           rng: np.random.Generator | None = None) -> ComplexTensor:
    """Sum of target atoms plus circular white noise of std ``noise_sigma``."""
    gen_r, gen_v = cfg.generators()
    Y = np.zeros((cfg.Ms, cfg.Mc), dtype=np.complex128)
    for t in scene.targets:
        Y += t.amp * outer_product([gen_r(coupled_range(t.r, t.v, cfg)), gen_v(t.v)])
    if scene.noise_sigma > 0:
        if rng is None:
            raise ValueError("noisy synthesis needs an rng")
        noise = rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape)
        Y += scene.noise_sigma / math.sqrt(2) * noise
    return Y


def measurement_vector(Y: ComplexTensor) -> np.ndarray:
    """Flatten with the fast-time index running fastest, ``y[m_c Ms + m_s]``."""
    return np.asarray(Y).T.reshape(-1)


def default_bounds(cfg: RadarConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    """Unambiguous (r', v) box shrunk by one resolution cell at each edge."""
    (r_lo, r_hi), (v_lo, v_hi) = cfg.domain().axes
    return ((r_lo + cfg.range_cell, r_hi - cfg.range_cell),
            (v_lo + cfg.velocity_cell, v_hi - cfg.velocity_cell))


def _circular(d, period):
    d = np.asarray(d, dtype=float)
    return np.where(np.abs(d) <= period / 2, d, (d + period / 2) % period - period / 2)


def normalized_distance(r1, v1, r2, v2, cfg: RadarConfig):
    """Distance in resolution cells.

    Both differences wrap with the ambiguity periods: the sub-atoms of
    ``r`` and ``r + range_period`` (likewise for ``v``) are identical.
    """
    dr = _circular(np.subtract(r1, r2), cfg.range_period) / cfg.range_cell
    dv = _circular(np.subtract(v1, v2), cfg.velocity_period) / cfg.velocity_cell
    return np.hypot(dr, dv)


def generate_random_scene(K: int, cfg: RadarConfig, rng: np.random.Generator,
                          bounds=None, min_separation: float = 2.0,
                          noise_sigma: float = 0.0, max_draws: int = 10_000) -> Scene:
    """Uniform (r', v) targets, pairwise separated, unit-modulus random phase.

    Separation is measured on the coupled coordinates, where targets are
    resolved. True ranges are folded into the unambiguous interval.
    """
    (r_lo, r_hi), (v_lo, v_hi) = default_bounds(cfg) if bounds is None else bounds
    picked: list[tuple[float, float]] = []
    draws = 0
    while len(picked) < K:
        if draws >= max_draws:
            raise InfeasibleScene(f"could not place {K} targets in {max_draws} draws")
        draws += 1
        rc, v = rng.uniform(r_lo, r_hi), rng.uniform(v_lo, v_hi)
        if all(normalized_distance(rc, v, q, w, cfg) >= min_separation for q, w in picked):
            picked.append((rc, v))
    phases = rng.uniform(0, 2 * math.pi, size=K)
    targets = [Target(float(wrap_range(decouple(rc, v, cfg), cfg)), float(v),
                      complex(np.exp(1j * ph)))
               for (rc, v), ph in zip(picked, phases)]
    return Scene(targets, noise_sigma)


def estimates_from_solution(params: np.ndarray, cfg: RadarConfig) -> list[tuple[float, float]]:
    """Map solver output rows ``(r', v)`` to ``(r, v)`` estimates."""
    return [(float(wrap_range(decouple(rc, v, cfg), cfg)), float(v)) for rc, v in params]


def evaluate_misses(estimates: Sequence[tuple[float, float]], truth: Scene,
                    cfg: RadarConfig) -> tuple[int, np.ndarray]:
    """Greedy nearest-pair matching; a pair is a hit when its distance is < 1.

    Returns the miss count and, per true target, the distance to its
    matched estimate (``inf`` when unmatched).
    """
    K = truth.K
    dist = np.full(K, np.inf)
    if K == 0:
        return 0, dist
    est = np.asarray(estimates, dtype=float).reshape(-1, 2)
    tr = np.array([(t.r, t.v) for t in truth.targets])
    pair = normalized_distance(tr[:, None, 0], tr[:, None, 1], est[None, :, 0], est[None, :, 1], cfg)
    pair = np.array(pair, dtype=float).reshape(K, len(est))
    free_t, free_e = set(range(K)), set(range(len(est)))
    # stable order so permuted estimate lists give the same distances
    order = sorted(((pair[i, j], tuple(est[j]), i, j) for i in range(K) for j in range(len(est))),
                   key=lambda x: (x[0], x[1], x[2]))
    for d, _, i, j in order:
        if i in free_t and j in free_e:
            dist[i] = d
            free_t.discard(i)
            free_e.discard(j)
    return int(np.sum(~(dist < 1.0))), dist
