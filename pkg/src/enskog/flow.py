"""Exact dynamics of finitely many hard spheres (3D) and hard rods (1D).

Unit mass throughout, so momenta and velocities coincide.  Backward
evolution is realized by momentum-reversal conjugation around the forward
event loop, which makes evolve(evolve(x, t), -t) == x by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

Array = np.ndarray

# Pair closer than sigma*(1 - ALLOWED_RTOL) counts as overlapping.  The
# slack absorbs the one-ulp jitter of streaming a pair to exact contact.
ALLOWED_RTOL = 1e-12

# Grazing encounters: skip pair if the reduced discriminant (sigma^2 minus
# the squared closest-approach distance) is below this times sigma^2.
GRAZING_TOL = 1e-14

# Two candidate events closer than TIE_FACTOR * sigma / p_max are refused.
TIE_FACTOR = 1e-12

_EVENT_CAP = 10_000_000  # hard stop against (measure-zero) infinite event chains


class FlowError(Exception):
    """Base class for hard-sphere flow failures."""

    kind = "FlowError"


class NonFiniteInput(FlowError):
    kind = "NonFiniteInput"


class ForbiddenInitialConfiguration(FlowError):
    kind = "ForbiddenInitialConfiguration"


class PathologicalEvent(FlowError):
    """Degenerate event structure (simultaneous or unbounded collisions).

    These states belong to the measure-zero set excluded from the flow's
    domain; the simulator refuses them instead of guessing an order.
    """

    kind = "PathologicalEvent"

    def __init__(self, message: str, times: Sequence[float] = ()):
        super().__init__(message)
        self.times = tuple(float(t) for t in times)


def _as_vector(v, name: str) -> Array:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a flat vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN/Inf")
    return arr


@dataclass(frozen=True)
class PhasePoint:
    """Position and momentum of one particle (momentum = velocity)."""

    q: Array
    p: Array

    def __post_init__(self):
        object.__setattr__(self, "q", _as_vector(self.q, "q"))
        object.__setattr__(self, "p", _as_vector(self.p, "p"))
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must share dimension")

    @property
    def dim(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class CollisionEvent:
    """Earliest pair contact: indices, time to contact, contact normal.

    eta = (q_i - q_j)/sigma evaluated at contact, so an approaching pair
    has <eta, p_i - p_j> < 0.  collision_map is even in eta, hence the
    orientation does not affect the dynamics.
    """

    pair: tuple[int, int]
    time: float
    eta: Array


class SystemState:
    """n hard spheres of diameter sigma; positions (n,d), momenta (n,d).

    Instances are treated as immutable values: every operation returns a
    new state.  Construction accepts forbidden (overlapping) configurations
    so that masks and flow operators can evaluate their zero branch; the
    dynamics itself refuses them.
    """

    __slots__ = ("q", "p", "sigma")

    def __init__(self, q, p, sigma: float):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if q.shape != p.shape:
            raise ValueError("position and momentum arrays must share shape")
        if q.ndim != 2 or q.shape[0] < 1:
            raise ValueError("state needs at least one particle")
        if q.shape[1] not in (1, 3):
            raise ValueError(f"dimension must be 1 or 3, got {q.shape[1]}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise NonFiniteInput("state contains NaN/Inf")
        if not (np.isfinite(sigma) and sigma > 0):
            raise ValueError("sigma must be positive and finite")
        self.q = q
        self.p = p
        self.sigma = float(sigma)

    @classmethod
    def from_points(cls, points: Iterable[PhasePoint], sigma: float) -> "SystemState":
        pts = list(points)
        return cls(np.array([x.q for x in pts]), np.array([x.p for x in pts]), sigma)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    @property
    def points(self) -> list[PhasePoint]:
        return [PhasePoint(self.q[i], self.p[i]) for i in range(self.n)]

    def allowed(self) -> bool:
        return is_allowed(self.q, self.sigma)

    def with_arrays(self, q=None, p=None) -> "SystemState":
        return SystemState(self.q if q is None else q,
                           self.p if p is None else p, self.sigma)

    def reversed_momenta(self) -> "SystemState":
        return self.with_arrays(p=-self.p)

    def free_streamed(self, t: float) -> "SystemState":
        return self.with_arrays(q=self.q + t * self.p)

    def subset(self, labels: Sequence[int]) -> "SystemState":
        idx = list(labels)
        return SystemState(self.q[idx], self.p[idx], self.sigma)

    def replace(self, labels: Sequence[int], sub: "SystemState") -> "SystemState":
        idx = list(labels)
        q = self.q.copy()
        p = self.p.copy()
        q[idx] = sub.q
        p[idx] = sub.p
        return SystemState(q, p, self.sigma)

    def to_json(self) -> str:
        return json.dumps({
            "sigma": self.sigma,
            "dim": self.dim,
            "points": [{"q": qi.tolist(), "p": pi.tolist()}
                       for qi, pi in zip(self.q, self.p)],
        })

    @classmethod
    def from_json(cls, text: str) -> "SystemState":
        doc = json.loads(text)
        q = np.array([pt["q"] for pt in doc["points"]], dtype=float)
        p = np.array([pt["p"] for pt in doc["points"]], dtype=float)
        state = cls(q, p, doc["sigma"])
        if state.dim != doc["dim"]:
            raise ValueError("dim field inconsistent with point data")
        return state

    def __repr__(self):
        return f"SystemState(n={self.n}, dim={self.dim}, sigma={self.sigma})"


def pair_separations(q: Array) -> Array:
    """All pairwise distances |q_i - q_j|, i < j, as a flat array."""
    n = q.shape[0]
    if n < 2:
        return np.empty(0)
    iu, ju = np.triu_indices(n, k=1)
    return np.linalg.norm(q[iu] - q[ju], axis=-1)


def is_allowed(positions, sigma: float) -> bool:
    """Characteristic function of allowed configurations.

    True iff every pair distance >= sigma (contact counts as allowed, up
    to ALLOWED_RTOL relative slack).
    """
    q = np.atleast_2d(np.asarray(positions, dtype=float))
    if not np.all(np.isfinite(q)):
        raise NonFiniteInput("positions contain NaN/Inf")
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError("sigma must be positive and finite")
    seps = pair_separations(q)
    if seps.size == 0:
        return True
    return bool(seps.min() >= sigma * (1.0 - ALLOWED_RTOL))


def allowed_mask(q_batch: Array, sigma: float) -> Array:
    """Vectorized allowed predicate over a batch of configurations.

    q_batch has shape (..., n, d); returns a float mask of shape (...) with
    1.0 on allowed configurations and 0.0 on forbidden ones.
    """
    q = np.asarray(q_batch, dtype=float)
    n = q.shape[-2]
    if n < 2:
        return np.ones(q.shape[:-2])
    iu, ju = np.triu_indices(n, k=1)
    d = q[..., iu, :] - q[..., ju, :]
    sep2 = np.sum(d * d, axis=-1)
    ok = np.all(sep2 >= (sigma * (1.0 - ALLOWED_RTOL)) ** 2, axis=-1)
    return ok.astype(float)


def collision_map(p_i, p_j, eta):
    """Elastic hard-sphere momentum exchange along the unit vector eta.

    p_i* = p_i - eta <eta, p_i - p_j>,  p_j* = p_j + eta <eta, p_i - p_j>.
    Broadcasts over leading axes.  Total momentum and kinetic energy are
    conserved up to rounding.
    """
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if not (np.all(np.isfinite(p_i)) and np.all(np.isfinite(p_j))
            and np.all(np.isfinite(eta))):
        raise NonFiniteInput("collision_map inputs contain NaN/Inf")
    norms = np.linalg.norm(eta, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError("eta must be a unit vector within 1e-12")
    g = np.sum(eta * (p_i - p_j), axis=-1, keepdims=True)
    return p_i - eta * g, p_j + eta * g


def _pair_contact_times(state: SystemState):
    """Contact times for all pairs; +inf where no (non-grazing) contact."""
    n = state.n
    iu, ju = np.triu_indices(n, k=1)
    dq = state.q[iu] - state.q[ju]
    dp = state.p[iu] - state.p[ju]
    b = np.sum(dq * dp, axis=-1)
    a = np.sum(dp * dp, axis=-1)
    c = np.sum(dq * dq, axis=-1) - state.sigma ** 2
    disc = b * b - a * c
    # Approaching, moving, and passing closer than sigma by a non-grazing
    # margin: disc/a = sigma^2 - d_min^2.
    cand = (b < 0.0) & (a > 0.0) & (disc > GRAZING_TOL * state.sigma ** 2 * a)
    tau = np.full(b.shape, np.inf)
    # Stable smaller root: c >= 0 on allowed states and -b + sqrt(disc) > 0.
    denom = -b[cand] + np.sqrt(disc[cand])
    tau[cand] = np.maximum(c[cand], 0.0) / denom
    return tau, iu, ju


def next_collision(state: SystemState) -> Optional[CollisionEvent]:
    """Earliest pair contact of the forward flow, or None if free forever.

    Raises PathologicalEvent when two distinct events fall within the tie
    tolerance of each other (simultaneous collisions are excluded from the
    flow's domain).
    """
    if not state.allowed():
        raise ForbiddenInitialConfiguration("state has an overlapping pair")
    if state.n < 2:
        return None
    tau, iu, ju = _pair_contact_times(state)
    k = int(np.argmin(tau))
    t_min = tau[k]
    if not np.isfinite(t_min):
        return None
    p_max = float(np.max(np.linalg.norm(state.p, axis=-1)))
    t_tie = TIE_FACTOR * state.sigma / p_max if p_max > 0 else 0.0
    close = np.flatnonzero(tau <= t_min + t_tie)
    if close.size > 1:
        raise PathologicalEvent(
            "simultaneous collision events within tie tolerance",
            times=tau[close])
    i, j = int(iu[k]), int(ju[k])
    qc_i = state.q[i] + t_min * state.p[i]
    qc_j = state.q[j] + t_min * state.p[j]
    eta = qc_i - qc_j
    eta = eta / np.linalg.norm(eta)
    return CollisionEvent(pair=(i, j), time=float(t_min), eta=eta)


def evolve(state: SystemState, t: float, collisionless: bool = False,
           events: Optional[list] = None) -> SystemState:
    """Hard-sphere flow: free streaming plus elastic exchanges at contact.

    A single free particle is mapped (q, p) -> (q + t p, p).  Negative t
    is realized by momentum-reversal conjugation.  With collisionless=True
    the interaction is switched off (sigma -> 0 dynamics) and the motion
    is pure free streaming.  If an `events` list is supplied, one
    (absolute_time, i, j) triple is appended per collision.
    """
    if not np.isfinite(t):
        raise NonFiniteInput("time must be finite")
    if collisionless or state.n == 1:
        return state.free_streamed(t)
    if not state.allowed():
        raise ForbiddenInitialConfiguration("state has an overlapping pair")
    if t == 0.0:
        return state
    if t < 0.0:
        rev_events = [] if events is not None else None
        out = evolve(state.reversed_momenta(), -t, events=rev_events)
        if events is not None:
            events.extend((-et, i, j) for (et, i, j) in rev_events)
        return out.reversed_momenta()

    current = state
    elapsed = 0.0
    for _ in range(_EVENT_CAP):
        ev = next_collision(current)
        remaining = t - elapsed
        if ev is None or ev.time > remaining:
            return current.free_streamed(remaining)
        current = current.free_streamed(ev.time)
        elapsed += ev.time
        i, j = ev.pair
        p = current.p.copy()
        p[i], p[j] = collision_map(current.p[i], current.p[j], ev.eta)
        current = current.with_arrays(p=p)
        # The flow never produces interpenetration; check at every event.
        if not current.allowed():
            raise PathologicalEvent(
                f"overlap produced at event t={elapsed}", times=(elapsed,))
        if events is not None:
            events.append((elapsed, i, j))
    raise PathologicalEvent(
        "event cap exceeded (infinite collision sequence?)", times=(elapsed,))


def apply_flow_to_function(f: Callable[[SystemState], float], t: float,
                           x: SystemState, collisionless: bool = False) -> float:
    """The operator (S_n(-t) f)(x): f at the backward image, 0 if forbidden."""
    if not x.allowed():
        return 0.0
    return float(f(evolve(x, -t, collisionless=collisionless)))


def rod_gas_evolve(q: Array, p: Array, t: float, sigma: float):
    """Exact 1D hard-rod evolution via the free-gas label-exchange map.

    q, p have shape (..., n) (scalar 1D coordinates); rows are independent
    rod systems assumed allowed.  Rods keep their spatial order, so the
    system maps onto free points by subtracting rank*sigma; evolving the
    points freely, re-sorting, and adding the offsets back reproduces the
    collision dynamics exactly.  Works for either sign of t.  Returns the
    evolved (q, p) in the original label order.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = q.shape[-1]
    offsets = sigma * np.arange(n, dtype=float)
    order = np.argsort(q, axis=-1, kind="stable")
    qs = np.take_along_axis(q, order, -1)
    ps = np.take_along_axis(p, order, -1)
    y = qs - offsets + t * ps
    rank = np.argsort(y, axis=-1, kind="stable")
    q_by_rank = np.take_along_axis(y, rank, -1) + offsets
    p_by_rank = np.take_along_axis(ps, rank, -1)
    q_out = np.empty_like(q)
    p_out = np.empty_like(p)
    np.put_along_axis(q_out, order, q_by_rank, -1)
    np.put_along_axis(p_out, order, p_by_rank, -1)
    return q_out, p_out


def trajectory_rows(state: SystemState, times: Sequence[float]):
    """CSV-ready rows (time, particle, q..., p...) sampled along the flow."""
    rows = []
    for t in times:
        snap = evolve(state, float(t))
        for i in range(snap.n):
            rows.append([float(t), i, *snap.q[i].tolist(), *snap.p[i].tolist()])
    return rows


def random_allowed_state(rng: np.random.Generator, n: int, dim: int,
                         sigma: float, box: float,
                         momentum_scale: float = 1.0,
                         max_tries: int = 100_000) -> SystemState:
    """Rejection-sample an allowed configuration in [0, box]^dim."""
    for _ in range(max_tries):
        q = rng.uniform(0.0, box, size=(n, dim))
        if is_allowed(q, sigma):
            p = rng.normal(0.0, momentum_scale, size=(n, dim))
            return SystemState(q, p, sigma)
    raise RuntimeError("could not place non-overlapping spheres; box too dense")
