"""Evolution operators of the kinetic cluster expansions.

The operators are evaluators only: an operator applied to a phase function
f at a concrete state x produces a number.  The general nested-sum
expansion is materialized term by term into NestedIndexTerm records before
evaluation so that term counts and coefficients are auditable; the
low-order closed forms (v1, v2, v3) are coded independently and serve as
the oracle for the materializer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .flow import SystemState, evolve, is_allowed
from .partitions import ClusterSet, apply_cumulant, apply_scattering_cumulant

PhaseFunction = Callable[[SystemState], float]

GENERAL_ORDER_CAP = 4     # term count explodes combinatorially beyond this
PLATEAU_RTOL = 1e-10      # scattering-operator plateau detection window


class OrderCapExceeded(ValueError):
    pass


class NoPlateau(RuntimeError):
    """Scattering-operator values still drifting at the largest grid time."""


# --------------------------------------------------------------------------
# operator building blocks (functions SystemState -> float, wrapped)
# --------------------------------------------------------------------------

def scattering_cumulant_operator(t: float, cluster: Sequence[int],
                                 free: Sequence[int],
                                 collisionless: bool = False):
    """Operator form of the scattering cumulant acting on given labels."""
    cs = ClusterSet(cluster=tuple(cluster), free=tuple(free))

    def wrap(f: PhaseFunction) -> PhaseFunction:
        def g(x: SystemState) -> float:
            return apply_scattering_cumulant(t, cs, f, x,
                                             collisionless=collisionless)
        return g

    return wrap


def _free_backward_operator(t: float, label: int):
    """S_1(-t, i): stream one particle backward; mask of one particle is 1."""
    def wrap(f: PhaseFunction) -> PhaseFunction:
        def g(x: SystemState) -> float:
            q = x.q.copy()
            q[label] = q[label] - t * x.p[label]
            return f(x.with_arrays(q=q))
        return g
    return wrap


def _masked_cumulant_operator(t: float, cluster: Sequence[int],
                              free: Sequence[int],
                              collisionless: bool = False):
    """A_{1+n}(-t, i, ...) I(i, ...): backward cumulant after the sub-mask."""
    cs = ClusterSet(cluster=tuple(cluster), free=tuple(free))
    labels = list(cs.labels)

    def wrap(f: PhaseFunction) -> PhaseFunction:
        def masked(y: SystemState) -> float:
            if not is_allowed(y.q[labels], y.sigma):
                return 0.0
            return f(y)

        def g(x: SystemState) -> float:
            return apply_cumulant(t, cs, masked, x,
                                  collisionless=collisionless)
        return g

    return wrap


# --------------------------------------------------------------------------
# closed forms (the n <= 2 oracle)
# --------------------------------------------------------------------------

def v1(t: float, s: int, f: PhaseFunction, x: SystemState,
       collisionless: bool = False) -> float:
    """First-order evolution operator: backward flow, mask, forward free flows."""
    if x.n != s:
        raise ValueError(f"state must carry exactly s={s} particles")
    op = scattering_cumulant_operator(t, range(s), (), collisionless)
    return op(f)(x)


def v2(t: float, s: int, f: PhaseFunction, x: SystemState,
       collisionless: bool = False) -> float:
    """Second-order operator from the closed-form solution of the recurrences."""
    if x.n != s + 1:
        raise ValueError(f"state must carry exactly s+1={s + 1} particles")
    sc = lambda cl, fr: scattering_cumulant_operator(t, cl, fr, collisionless)
    total = sc(range(s), (s,))(f)(x)
    for i in range(s):
        total -= sc(range(s), ())(sc((i,), (s,))(f))(x)
    return total


def v3(t: float, s: int, f: PhaseFunction, x: SystemState,
       collisionless: bool = False) -> float:
    """Third-order operator: closed form including the 2! cross terms."""
    if x.n != s + 2:
        raise ValueError(f"state must carry exactly s+2={s + 2} particles")
    sc = lambda cl, fr: scattering_cumulant_operator(t, cl, fr, collisionless)
    a1_y = sc(range(s), ())

    total = sc(range(s), (s, s + 1))(f)(x)
    for i1 in range(s + 1):
        total -= 2.0 * sc(range(s), (s,))(sc((i1,), (s + 1,))(f))(x)
    inner = []
    for i1 in range(s):
        inner.append(a1_y(sc((i1,), (s, s + 1))(f))(x))
    for i1 in range(s):
        for i2 in range(s + 1):
            inner.append(-2.0 * a1_y(sc((i1,), (s,))(sc((i2,), (s + 1,))(f)))(x))
    for i1 in range(s):
        for i2 in range(i1 + 1, s):
            inner.append(2.0 * a1_y(sc((i1,), (s,))(sc((i2,), (s + 1,))(f)))(x))
    return total - math.fsum(inner)


# --------------------------------------------------------------------------
# general expansion, materialized
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorFactor:
    """One scattering cumulant in a term: its cluster and free labels."""

    cluster: tuple[int, ...]
    free: tuple[int, ...]


@dataclass(frozen=True)
class NestedIndexTerm:
    """One fully expanded term of the nested-sum operator expansion.

    `inner` stores the padded monotone index sequences (one per group j,
    endpoints m_j and 0 included).  `factors` lists, per group, the
    scattering cumulants with at least one attached particle; order-1
    factors are identities and are dropped at materialization time.
    Application order is factors[0] first, then factors[1], ..., then the
    outer cumulant.
    """

    k: int
    m: tuple[int, ...]
    inner: tuple[tuple[int, ...], ...]
    sign: int
    coefficient: Fraction
    outer: OperatorFactor
    factors: tuple[tuple[OperatorFactor, ...], ...]

    def __post_init__(self):
        for seq in self.inner:
            if any(seq[i] < seq[i + 1] for i in range(len(seq) - 1)):
                raise ValueError("inner index sequences must be non-increasing")
        if self.coefficient <= 0:
            raise ValueError("coefficient must be positive before the sign")


@dataclass(frozen=True)
class OperatorEvalRequest:
    """Evaluation request for the general (or renormalized) expansion."""

    s: int
    n: int
    t: float
    f: PhaseFunction
    x: SystemState
    collisionless: bool = False

    def __post_init__(self):
        if self.n > GENERAL_ORDER_CAP:
            raise OrderCapExceeded(
                f"general expansion capped at n={GENERAL_ORDER_CAP}")
        if self.x.n != self.s + self.n:
            raise ValueError("state must carry exactly s+n particles")


def _compositions(total_max: int, parts: int):
    """Ordered tuples (m_1..m_parts), each >= 1, sum <= total_max."""
    if parts == 0:
        yield ()
        return
    for first in range(1, total_max - parts + 2):
        for rest in _compositions(total_max - first, parts - 1):
            yield (first,) + rest


def _monotone_sequences(start: int, length: int):
    """Non-increasing integer sequences of given length from start to >= 0."""
    if length == 0:
        yield ()
        return
    for v in range(start, -1, -1):
        for rest in _monotone_sequences(v, length - 1):
            yield (v,) + rest


def nested_index_terms(s: int, n: int,
                       renormalized: bool = False) -> list[NestedIndexTerm]:
    """Materialize the expansion of the (1+n)th-order evolution operator.

    Labels are 0-based: the cluster is 0..s-1 and the free particles are
    s..s+n-1.  In the renormalized variant the inner index sequences are
    truncated to length s+1 and only cluster particles receive attached
    groups.
    """
    if n > GENERAL_ORDER_CAP:
        raise OrderCapExceeded(f"general expansion capped at n={GENERAL_ORDER_CAP}")
    terms: list[NestedIndexTerm] = []
    cluster = tuple(range(s))
    for k in range(0, n + 1):
        for m_vec in _compositions(n, k):
            rem = n - sum(m_vec)
            base = Fraction(math.factorial(n), math.factorial(rem))
            outer = OperatorFactor(cluster=cluster,
                                   free=tuple(range(s, s + rem)))
            # one monotone sequence choice per group j
            seq_space = []
            for j, mj in enumerate(m_vec, start=1):
                r_j = n - sum(m_vec[:j])
                n_free = 0 if renormalized else r_j
                # free indices k^j_2 .. k^j_{n_free+s}; pad with m_j and 0
                seqs = []
                for mid in _monotone_sequences(mj, n_free + s - 1):
                    seqs.append(((mj,) + mid + (0,), r_j))
                seq_space.append(seqs)

            def expand(j, chosen):
                if j == len(seq_space):
                    coeff = base
                    factors = []
                    for (seq, r_j) in chosen:
                        ops = []
                        L = len(seq) - 1     # targets i_j = 1..L
                        for i_j in range(1, L + 1):
                            a = seq[L - i_j]      # k^j_{L+1-i_j}, 0-based list
                            b = seq[L + 1 - i_j]  # k^j_{L+2-i_j}
                            drop = a - b
                            coeff /= math.factorial(drop)
                            if drop > 0:
                                attached = tuple(range(s + r_j + b, s + r_j + a))
                                ops.append(OperatorFactor(cluster=(i_j - 1,),
                                                          free=attached))
                        factors.append(tuple(ops))
                    terms.append(NestedIndexTerm(
                        k=k, m=m_vec,
                        inner=tuple(seq for seq, _ in chosen),
                        sign=(-1) ** k, coefficient=coeff,
                        outer=outer, factors=tuple(factors)))
                    return
                for choice in seq_space[j]:
                    expand(j + 1, chosen + [choice])

            expand(0, [])
    return terms


def _evaluate_term(term: NestedIndexTerm, t: float, f: PhaseFunction,
                   x: SystemState, collisionless: bool) -> float:
    g = f
    for ops in term.factors:
        for op in ops:
            g = scattering_cumulant_operator(
                t, op.cluster, op.free, collisionless)(g)
    g = scattering_cumulant_operator(
        t, term.outer.cluster, term.outer.free, collisionless)(g)
    return term.sign * float(term.coefficient) * g(x)


def v_general(req: OperatorEvalRequest) -> float:
    """Full nested-sum evaluation of the (1+n)th-order evolution operator."""
    terms = nested_index_terms(req.s, req.n)
    return math.fsum(_evaluate_term(term, req.t, req.f, req.x,
                                    req.collisionless) for term in terms)


def v_renormalized(req: OperatorEvalRequest) -> float:
    """Renormalized evolution operator with truncated inner index ranges."""
    terms = nested_index_terms(req.s, req.n, renormalized=True)
    return math.fsum(_evaluate_term(term, req.t, req.f, req.x,
                                    req.collisionless) for term in terms)


# --------------------------------------------------------------------------
# the kinetic cluster recurrence as a numerical residual
# --------------------------------------------------------------------------

@dataclass
class RecurrenceReport:
    s: int
    n: int
    t: float
    residuals: list[float] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    @property
    def mean_residual(self) -> float:
        return float(np.mean(self.residuals)) if self.residuals else 0.0


def _v_operator(t: float, s: int, free: Sequence[int],
                collisionless: bool = False):
    """The (1+len(free))th-order evolution operator as a wrappable operator."""
    n_op = len(free)
    terms = nested_index_terms(s, n_op)
    # materialized labels use s..s+n_op-1 for the free slots; they already
    # match the recurrence layout where the operator's free labels come
    # right after the cluster
    expected = tuple(range(s, s + n_op))
    if tuple(free) != expected:
        raise ValueError("free labels must be contiguous after the cluster")

    def wrap(f: PhaseFunction) -> PhaseFunction:
        def g(x: SystemState) -> float:
            return math.fsum(_evaluate_term(term, t, f, x, collisionless)
                             for term in terms)
        return g

    return wrap


def verify_recurrence(s: int, n: int, t: float,
                      samples: Sequence[SystemState], f: PhaseFunction,
                      collisionless: bool = False) -> RecurrenceReport:
    """Residual of the kinetic cluster expansion, checked per sample state.

    LHS: the (1+n)th-order backward cumulant applied after the full-set
    allowed mask.  RHS: the sum over k1 of the (1+n-k1)th-order operator
    composed with products of lower-order masked cumulants distributing
    the remaining k1 particles over the surviving labels.  Pure trajectory
    arithmetic, no integrals.
    """
    if n > 2:
        raise OrderCapExceeded("recurrence check supports n <= 2")
    cs_full = ClusterSet(cluster=tuple(range(s)), free=tuple(range(s, s + n)))
    report = RecurrenceReport(s=s, n=n, t=t)

    # precompute RHS structure per k1
    rhs_plan = []
    for k1 in range(0, n + 1):
        n_keep = n - k1
        L = n_keep + s            # targets i = 1..L
        v_op = _v_operator(t, s, tuple(range(s, s + n_keep)), collisionless)
        for mid in _monotone_sequences(k1, L - 1):
            seq = (k1,) + mid + (0,)
            coeff = Fraction(math.factorial(n), math.factorial(n_keep))
            ops = []
            for i in range(1, L + 1):
                a = seq[L - i]
                b = seq[L + 1 - i]
                drop = a - b
                coeff /= math.factorial(drop)
                if drop > 0:
                    attached = tuple(range(s + n_keep + b, s + n_keep + a))
                    ops.append(("cum", (i - 1,), attached))
                else:
                    ops.append(("stream", i - 1))
            rhs_plan.append((float(coeff), v_op, ops))

    def full_masked(g: PhaseFunction) -> PhaseFunction:
        def h(y: SystemState) -> float:
            if not is_allowed(y.q[: s + n], y.sigma):
                return 0.0
            return g(y)
        return h

    for x in samples:
        if x.n != s + n:
            raise ValueError("each sample must carry s+n particles")
        lhs = apply_cumulant(t, cs_full, full_masked(f), x,
                             collisionless=collisionless)
        rhs_parts = []
        for coeff, v_op, ops in rhs_plan:
            g = f
            for op in ops:
                if op[0] == "stream":
                    g = _free_backward_operator(t, op[1])(g)
                else:
                    g = _masked_cumulant_operator(
                        t, op[1], op[2], collisionless)(g)
            rhs_parts.append(coeff * v_op(g)(x))
        report.residuals.append(abs(lhs - math.fsum(rhs_parts)))
    return report


# --------------------------------------------------------------------------
# Markovian limit: the scattering operator as a numerical plateau
# --------------------------------------------------------------------------

@dataclass
class ScatteringResult:
    value: float
    plateau_time: float
    last_collision_time: Optional[float]
    times: list[float]
    values: list[float]


def default_scattering_grid(x: SystemState) -> list[float]:
    """Geometric time grid {1,2,4,...,64} * (sigma / mean speed)."""
    speeds = np.linalg.norm(x.p, axis=-1)
    p_bar = float(np.mean(speeds))
    if p_bar <= 0:
        p_bar = 1.0
    return [x.sigma / p_bar * (2 ** k) for k in range(0, 7)]


def scattering_operator(x: SystemState, f: PhaseFunction,
                        t_grid: Optional[Sequence[float]] = None) -> ScatteringResult:
    """Evaluate the scattering operator S^ f at x as a large-time plateau.

    Applies the backward flow followed by forward free flows over an
    increasing time grid and detects three consecutive values within
    PLATEAU_RTOL relative of each other.  Also reports the backward time
    of the trajectory's last collision.
    """
    if not x.allowed():
        raise ValueError("scattering operator expects an allowed state")
    grid = list(t_grid) if t_grid is not None else default_scattering_grid(x)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("t_grid must be strictly increasing")
    values = []
    for tau in grid:
        y = evolve(x, -tau).free_streamed(tau)
        values.append(float(f(y)))
    events: list = []
    evolve(x, -grid[-1], events=events)
    last_collision = max((-et for (et, _, _) in events), default=None)

    # A window of equal values before the last collision is not a limit;
    # anchor the plateau past the final backward event.
    t_min = last_collision if last_collision is not None else 0.0
    for j in range(2, len(values)):
        if grid[j - 2] < t_min:
            continue
        window = values[j - 2:j + 1]
        scale = max(1.0, max(abs(v) for v in window))
        if (abs(window[2] - window[1]) <= PLATEAU_RTOL * scale
                and abs(window[1] - window[0]) <= PLATEAU_RTOL * scale):
            return ScatteringResult(value=window[2], plateau_time=grid[j],
                                    last_collision_time=last_collision,
                                    times=grid, values=values)
    raise NoPlateau(
        "scattering values still drifting at the largest grid time "
        f"(grid end {grid[-1]}, last collision {last_collision})")


def scattering_image(x: SystemState, labels: Sequence[int],
                     t_grid: Optional[Sequence[float]] = None) -> SystemState:
    """Phase-space image under the scattering map of the labeled subsystem.

    Backward interacting flow then forward free flow of the subsystem,
    taken past its last backward collision; other particles untouched.
    """
    sub = x.subset(labels)
    grid = list(t_grid) if t_grid is not None else default_scattering_grid(sub)
    events: list = []
    back = evolve(sub, -grid[-1], events=events)
    last_collision = max((-et for (et, _, _) in events), default=None)
    # Past the last backward event the image is exactly constant in tau;
    # require one full grid step of margin before accepting it.
    if last_collision is not None and last_collision > grid[-2]:
        raise NoPlateau(
            f"backward collisions up to {last_collision} leave no margin "
            f"on the grid ending at {grid[-1]}")
    return x.replace(labels, back.free_streamed(grid[-1]))
