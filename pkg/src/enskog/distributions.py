"""One-particle distributions: analytic separable, 1D grid, and ensembles.

Distributions are immutable values.  Evaluation broadcasts over leading
axes; samplers draw from the normalized distribution and are deterministic
for a fixed generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .bounds import convergence_constants
from .flow import PhasePoint, allowed_mask, is_allowed

Array = np.ndarray


class NormGuardError(RuntimeError):
    """Strict-mode failure of a convergence-radius guard."""


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


# --------------------------------------------------------------------- profiles

@dataclass(frozen=True)
class BoxProfile:
    """Constant density on an axis-aligned box, zero outside."""

    lo: Array
    hi: Array
    density: float = 1.0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box needs lo < hi componentwise")
        if self.density < 0:
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def evaluate(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        return self.density * inside.astype(float)

    def mass(self) -> float:
        return self.density * float(np.prod(self.hi - self.lo))

    def sample(self, rng, size: int) -> Array:
        return _rng(rng).uniform(self.lo, self.hi, size=(size, self.dim))

    def scale(self) -> float:
        return float(np.max(self.hi - self.lo))


@dataclass(frozen=True)
class GaussianProfile:
    """Product of per-axis normal densities times a total mass."""

    mean: Array
    std: Array
    mass_value: float = 1.0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if std.shape != mean.shape or np.any(std <= 0):
            raise ValueError("std must be positive and match mean")
        if self.mass_value < 0:
            raise ValueError("mass must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    def evaluate(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.std
        norm = np.prod(self.std) * (2.0 * math.pi) ** (self.dim / 2.0)
        return self.mass_value * np.exp(-0.5 * np.sum(z * z, axis=-1)) / norm

    def mass(self) -> float:
        return self.mass_value

    def sample(self, rng, size: int) -> Array:
        return _rng(rng).normal(self.mean, self.std, size=(size, self.dim))

    def scale(self) -> float:
        return float(np.max(self.std))


Profile = Union[BoxProfile, GaussianProfile]


def maxwellian(temperature: float, dim: int, drift=0.0) -> GaussianProfile:
    """Maxwellian momentum profile at unit mass: std = sqrt(T) per axis."""
    drift_vec = np.full(dim, 0.0) + np.asarray(drift, dtype=float)
    return GaussianProfile(mean=drift_vec,
                           std=np.full(dim, math.sqrt(temperature)))


# ------------------------------------------------------------ representations

@dataclass(frozen=True)
class AnalyticSeparable:
    """F(q, p) = spatial(q) * momentum(p)."""

    spatial: Profile
    momentum: Profile

    def __post_init__(self):
        if self.spatial.dim != self.momentum.dim:
            raise ValueError("spatial and momentum profiles must share dim")

    @property
    def dim(self) -> int:
        return self.spatial.dim

    def evaluate_qp(self, q, p) -> Array:
        return self.spatial.evaluate(q) * self.momentum.evaluate(p)

    def l1_norm(self) -> float:
        return self.spatial.mass() * self.momentum.mass()

    def sample_qp(self, rng, size: int):
        gen = _rng(rng)
        return self.spatial.sample(gen, size), self.momentum.sample(gen, size)

    def momentum_scale(self) -> float:
        return self.momentum.scale()


@dataclass(frozen=True)
class Grid1D:
    """Piecewise values on a uniform (q, p) mesh; zero outside the mesh.

    `values` holds cell-center values, shape (nq, np).  Evaluation is
    bilinear between cell centers (clamped inside the outermost half
    cells); the L1 norm is the Riemann cell sum.
    """

    q_min: float
    q_max: float
    p_min: float
    p_max: float
    values: Array

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 2 or vals.shape[1] < 2:
            raise ValueError("values must be a (nq, np) array, nq, np >= 2")
        if np.any(vals < 0):
            raise ValueError("grid values must be nonnegative")
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise ValueError("mesh extents must be positive")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return 1

    @property
    def shape(self):
        return self.values.shape

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.values.shape[0]

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.values.shape[1]

    def centers(self):
        nq, npp = self.values.shape
        qc = self.q_min + (np.arange(nq) + 0.5) * self.dq
        pc = self.p_min + (np.arange(npp) + 0.5) * self.dp
        return qc, pc

    def evaluate_qp(self, q, p) -> Array:
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        if q.ndim and q.shape[-1] == 1:
            q = q[..., 0]
        if p.ndim and p.shape[-1] == 1:
            p = p[..., 0]
        nq, npp = self.values.shape
        inside = ((q >= self.q_min) & (q <= self.q_max)
                  & (p >= self.p_min) & (p <= self.p_max))
        # continuous index relative to cell centers
        gi = np.clip((q - self.q_min) / self.dq - 0.5, 0.0, nq - 1.0)
        gj = np.clip((p - self.p_min) / self.dp - 0.5, 0.0, npp - 1.0)
        i0 = np.clip(np.floor(gi).astype(int), 0, nq - 2)
        j0 = np.clip(np.floor(gj).astype(int), 0, npp - 2)
        fi = gi - i0
        fj = gj - j0
        v = (self.values[i0, j0] * (1 - fi) * (1 - fj)
             + self.values[i0 + 1, j0] * fi * (1 - fj)
             + self.values[i0, j0 + 1] * (1 - fi) * fj
             + self.values[i0 + 1, j0 + 1] * fi * fj)
        return np.where(inside, v, 0.0)

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.dq * self.dp)

    def sample_qp(self, rng, size: int):
        gen = _rng(rng)
        w = self.values.ravel()
        total = w.sum()
        if total <= 0:
            raise ValueError("cannot sample from an all-zero grid")
        idx = gen.choice(w.size, size=size, p=w / total)
        nq, npp = self.values.shape
        i, j = np.divmod(idx, npp)
        q = self.q_min + (i + gen.uniform(0, 1, size)) * self.dq
        p = self.p_min + (j + gen.uniform(0, 1, size)) * self.dp
        return q[:, None], p[:, None]

    def momentum_scale(self) -> float:
        qc, pc = self.centers()
        w = self.values.sum(axis=0)
        if w.sum() <= 0:
            return 1.0
        mean = np.average(pc, weights=w)
        return float(math.sqrt(np.average((pc - mean) ** 2, weights=w)) or 1.0)

    def to_csv_rows(self):
        qc, pc = self.centers()
        return [[qc[i], pc[j], self.values[i, j]]
                for i in range(len(qc)) for j in range(len(pc))]


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted phase samples with Gaussian kernel-density evaluation.

    Momentum bandwidth follows the Silverman rule per axis unless given;
    the position bandwidth is the caller's choice (sigma/4 is the
    pragmatic default used by the MD couplings) and is recorded in
    metadata.
    """

    q: Array
    p: Array
    weights: Array
    position_bandwidth: float
    momentum_bandwidth: Optional[Array] = None

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if q.shape != p.shape or q.shape[0] != w.size:
            raise ValueError("q, p, weights must agree in sample count")
        if np.any(w <= 0):
            raise ValueError("ensemble weights must be positive")
        if self.position_bandwidth <= 0:
            raise ValueError("position bandwidth must be positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "weights", w)
        if self.momentum_bandwidth is None:
            m = w.size
            std = np.sqrt(np.average((p - np.average(p, axis=0,
                                                     weights=w)) ** 2,
                                     axis=0, weights=w))
            silverman = 0.9 * np.maximum(std, 1e-12) * m ** (-0.2)
            object.__setattr__(self, "momentum_bandwidth", silverman)
        else:
            object.__setattr__(self, "momentum_bandwidth",
                               np.atleast_1d(np.asarray(
                                   self.momentum_bandwidth, dtype=float)))

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def evaluate_qp(self, q, p) -> Array:
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        hq = self.position_bandwidth
        hp = self.momentum_bandwidth
        zq = (q[..., None, :] - self.q) / hq
        zp = (p[..., None, :] - self.p) / hp
        expo = -0.5 * (np.sum(zq * zq, axis=-1) + np.sum(zp * zp, axis=-1))
        norm = ((2 * math.pi) ** self.dim * hq ** self.dim
                * float(np.prod(hp)))
        return np.sum(self.weights * np.exp(expo), axis=-1) / norm

    def l1_norm(self) -> float:
        return float(np.sum(self.weights))

    def sample_qp(self, rng, size: int):
        gen = _rng(rng)
        idx = gen.choice(self.weights.size, size=size,
                         p=self.weights / self.weights.sum())
        q = self.q[idx] + gen.normal(0.0, self.position_bandwidth,
                                     size=(size, self.dim))
        p = self.p[idx] + gen.normal(0.0, 1.0, size=(size, self.dim)) \
            * self.momentum_bandwidth
        return q, p

    def momentum_scale(self) -> float:
        mean = np.average(self.p, axis=0, weights=self.weights)
        var = np.average((self.p - mean) ** 2, axis=0, weights=self.weights)
        return float(np.sqrt(np.max(var)) or 1.0)


OneParticleDistribution = Union[AnalyticSeparable, Grid1D, ParticleEnsemble]


# ------------------------------------------------------------- module-level ops

def _split_x(x):
    if isinstance(x, PhasePoint):
        return x.q, x.p
    q, p = x
    return np.asarray(q, dtype=float), np.asarray(p, dtype=float)


def evaluate(F: OneParticleDistribution, x) -> Array:
    """Pointwise value of F at a PhasePoint or (q, p) arrays."""
    q, p = _split_x(x)
    if q.shape[-1] != F.dim:
        raise ValueError(f"dimension mismatch: point dim {q.shape[-1]}, "
                         f"distribution dim {F.dim}")
    out = F.evaluate_qp(q, p)
    return float(out) if np.ndim(out) == 0 else out


def l1_norm(F: OneParticleDistribution) -> float:
    """Integral of |F| by the representation's native quadrature."""
    return F.l1_norm()


def sample(F: OneParticleDistribution, rng, size: Optional[int] = None):
    """Draw from F / ||F||; deterministic for a fixed generator state."""
    if l1_norm(F) <= 0:
        raise ValueError("cannot sample from a non-normalizable distribution")
    m = 1 if size is None else size
    q, p = F.sample_qp(rng, m)
    if size is None:
        return PhasePoint(q[0], p[0])
    return q, p


def momentum_scale(F: OneParticleDistribution) -> float:
    return F.momentum_scale()


# ------------------------------------------------------------------ chaos data

@dataclass(frozen=True)
class InitialChaosData:
    """Statistically independent particles behind the allowed-set mask."""

    f1: OneParticleDistribution
    s: int
    sigma: float

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("particle count must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def chaos_product(data: InitialChaosData, *points) -> float:
    """Product of one-particle values times the allowed-configuration mask."""
    if len(points) != data.s:
        raise ValueError(f"expected {data.s} phase points")
    qs = []
    total = 1.0
    for x in points:
        q, p = _split_x(x)
        total *= float(evaluate(data.f1, (q, p)))
        qs.append(q)
    if data.s > 1 and not is_allowed(np.stack(qs), data.sigma):
        return 0.0
    return total


def chaos_product_batch(f1: OneParticleDistribution, q: Array, p: Array,
                        sigma: float) -> Array:
    """Vectorized chaos product over batches: q, p of shape (..., n, d)."""
    vals = f1.evaluate_qp(q, p)
    return np.prod(vals, axis=-1) * allowed_mask(q, sigma)


# ------------------------------------------------------------------ norm guards

GUARD_REGIMES = ("bbgky", "collision", "functional", "equivalence")


def check_norm_guard(F: OneParticleDistribution, regime: str,
                     s: Optional[int] = None, strict: bool = False) -> str:
    """Compare ||F|| with the matching convergence radius.

    Returns "ok" or a "warn:..." message; under strict=True a violation
    raises NormGuardError.  The radii come from convergence_constants()
    (single source of truth); they are sufficient, not necessary, so the
    default is to warn and proceed.
    """
    consts = convergence_constants()
    norm = l1_norm(F)
    if regime == "bbgky":
        radius = consts.bbgky_radius
    elif regime == "collision":
        radius = consts.enskog_collision
    elif regime == "functional":
        radius = consts.functional_radius(int(s))
    elif regime == "equivalence":
        radius = consts.equivalence_radius(int(s))
    else:
        raise ValueError(f"unknown guard regime {regime!r}")
    if norm < radius:
        return "ok"
    message = (f"warn: ||F||={norm:.6g} >= {regime} radius {radius:.6g}; "
               "series convergence not guaranteed")
    if strict:
        raise NormGuardError(message)
    return message
