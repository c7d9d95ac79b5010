"""Truncated Monte Carlo evaluation of the one-particle series solution,
marginal functionals, correlation functional, observables, and the
weak-form residual of the kinetic equation.

All drivers here are 1D (the desk-scale regime of the oracle comparisons);
field-particle positions are importance-sampled in the interaction horizon
around the cluster's backward rays, momenta from a Gaussian proposal
matched to the initial data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .collisions import momentum_drift
from .distributions import (
    OneParticleDistribution,
    check_norm_guard,
    momentum_scale,
)
from .fast1d import allowed_rows, cumulant_batch, v_operator_batch, v1_batch
from .flow import PathologicalEvent, SystemState, evolve, is_allowed

Array = np.ndarray


@dataclass(frozen=True)
class TruncationSpec:
    """Series order, MC budget, and proposal parameters.

    The spatial proposal for field particles is uniform on the interval
    hull of the cluster's backward rays padded by R(t) = sigma + t*p_cut;
    outside that horizon the cumulant integrand vanishes for momenta below
    p_cut, and the neglected fast tail is reported, not ignored.
    """

    order: int
    mc_samples: int
    seed: int = 0
    p_cut: Optional[float] = None            # default 6 proposal widths
    proposal_scale: Optional[float] = None   # default: momentum scale of F

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.mc_samples < 100:
            raise ValueError("mc_samples must be at least 100")

    def scale_for(self, F: OneParticleDistribution) -> float:
        return self.proposal_scale if self.proposal_scale is not None \
            else momentum_scale(F)

    def cut_for(self, F: OneParticleDistribution) -> float:
        return self.p_cut if self.p_cut is not None \
            else 6.0 * self.scale_for(F)


@dataclass
class SeriesEstimate:
    """Per-order values and errors at the requested phase points."""

    points: Array                  # (P, 2) columns (q, p)
    orders: Array                  # (N+1, P)
    errors: Array                  # (N+1, P)
    norm_guard: str
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> Array:
        return self.orders.sum(axis=0)

    @property
    def combined_error(self) -> Array:
        return np.sqrt((self.errors ** 2).sum(axis=0))

    @property
    def negative_fraction(self) -> float:
        """Fraction of points where truncation produced a negative total."""
        tot = self.total
        return float(np.mean(tot < 0.0)) if tot.size else 0.0


def _as_points(points) -> Array:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != 2:
        raise ValueError("points must be (P, 2) arrays of 1D (q, p) pairs")
    return pts


def _gaussian_proposal(rng, m, n, drift, scale):
    z = rng.normal(size=(m, n))
    pdf = np.exp(-0.5 * z ** 2) / math.sqrt(2 * math.pi) / scale
    return drift + scale * z, pdf


def _chaos_fvec(F0, sigma):
    def fvec(q: Array, p: Array) -> Array:
        vals = F0.evaluate_qp(q[..., None], p[..., None])
        prod = np.prod(vals, axis=-1)
        return prod * allowed_rows(q, sigma)
    return fvec


def _product_fvec(F1):
    def fvec(q: Array, p: Array) -> Array:
        vals = F1.evaluate_qp(q[..., None], p[..., None])
        return np.prod(vals, axis=-1)
    return fvec


def _capsule_interval(q0: float, p0: float, t: float, radius: float):
    lo = min(q0, q0 - t * p0) - radius
    hi = max(q0, q0 - t * p0) + radius
    return lo, hi


# --------------------------------------------------------------------------
# the one-particle series
# --------------------------------------------------------------------------

def solve_f1_series(F0: OneParticleDistribution, t: float, sigma: float,
                    trunc: TruncationSpec, points,
                    collisionless: bool = False,
                    strict: bool = False) -> SeriesEstimate:
    """Truncated cumulant series for the one-particle function at given points.

    The order-0 term is exact free streaming of the initial data; order n
    adds the (1+n)-body backward cumulant of the chaos product integrated
    over n field particles by importance sampling.  At t = 0 all n >= 1
    terms vanish sample-by-sample, so the estimate is exact there.
    """
    if F0.dim != 1:
        raise ValueError("series drivers operate on 1D distributions")
    guard = check_norm_guard(F0, "bbgky", strict=strict)
    pts = _as_points(points)
    P = pts.shape[0]
    N = trunc.order
    orders = np.zeros((N + 1, P))
    errors = np.zeros((N + 1, P))

    stream_q = pts[:, 0] - t * pts[:, 1]
    orders[0] = F0.evaluate_qp(stream_q[:, None], pts[:, 1][:, None])

    scale = trunc.scale_for(F0)
    cut = trunc.cut_for(F0)
    drift = float(momentum_drift(F0)[0])
    radius = sigma + abs(t) * cut
    rng = np.random.default_rng(trunc.seed)
    m = trunc.mc_samples
    chaos = _chaos_fvec(F0, sigma)

    for n in range(1, N + 1):
        for j in range(P):
            q0, p0 = pts[j]
            lo, hi = _capsule_interval(q0, p0, t, radius)
            length = hi - lo
            qx = rng.uniform(lo, hi, size=(m, n))
            px, pdf = _gaussian_proposal(rng, m, n, drift, scale)
            w = np.prod(length / pdf, axis=1)
            q = np.column_stack([np.full(m, q0), qx])
            p = np.column_stack([np.full(m, p0), px])
            vals = cumulant_batch(t, (0,), tuple(range(1, n + 1)), chaos,
                                  q, p, sigma, collisionless)
            samples = w * vals / math.factorial(n)
            orders[n, j] = float(np.mean(samples))
            errors[n, j] = float(np.std(samples, ddof=1)) / math.sqrt(m)

    tail = math.erfc(cut / (math.sqrt(2.0) * scale))
    return SeriesEstimate(
        points=pts, orders=orders, errors=errors, norm_guard=guard,
        metadata={"t": t, "sigma": sigma, "order": N, "mc_samples": m,
                  "seed": trunc.seed, "p_cut": cut, "horizon_radius": radius,
                  "p_cut_tail_prob": tail, "collisionless": collisionless,
                  "rejected_fraction": 0.0})


# --------------------------------------------------------------------------
# marginal functionals of the state
# --------------------------------------------------------------------------

def _mixture_positions(rng, m, n, anchors, t, radius):
    """Field positions from the capsule mixture over the cluster anchors."""
    s = len(anchors)
    intervals = [_capsule_interval(q0, p0, t, radius) for q0, p0 in anchors]
    lengths = np.array([hi - lo for lo, hi in intervals])
    comp = rng.integers(0, s, size=(m, n))
    u = rng.uniform(0.0, 1.0, size=(m, n))
    lows = np.array([lo for lo, _ in intervals])
    qx = lows[comp] + u * lengths[comp]
    # exact mixture density at each draw
    dens = np.zeros((m, n))
    for (lo, hi), L in zip(intervals, lengths):
        dens += ((qx >= lo) & (qx <= hi)) / L
    dens /= s
    return qx, dens


def _functional_orders(s: int, t: float, F1: OneParticleDistribution,
                       sigma: float, trunc: TruncationSpec, xs: Array,
                       collisionless: bool, renormalized: bool):
    """Per-order values/errors of the s-particle functional at one point."""
    N = trunc.order
    values = np.zeros(N + 1)
    errs = np.zeros(N + 1)
    prod = _product_fvec(F1)

    q_cluster = xs[:, 0]
    p_cluster = xs[:, 1]
    v0 = v1_batch(t, s, sigma, collisionless)(prod)(
        q_cluster[None, :], p_cluster[None, :])
    values[0] = float(v0[0])

    scale = trunc.scale_for(F1)
    cut = trunc.cut_for(F1)
    drift = float(momentum_drift(F1)[0])
    radius = sigma + abs(t) * cut
    rng = np.random.default_rng(trunc.seed)
    m = trunc.mc_samples
    anchors = [(q_cluster[i], p_cluster[i]) for i in range(s)]

    for n in range(1, N + 1):
        op = v_operator_batch(t, s, n, sigma, collisionless,
                              renormalized=renormalized)(prod)
        qx, qdens = _mixture_positions(rng, m, n, anchors, t, radius)
        px, pdf = _gaussian_proposal(rng, m, n, drift, scale)
        w = np.prod(1.0 / (qdens * pdf), axis=1)
        q = np.column_stack([np.tile(q_cluster, (m, 1)), qx])
        p = np.column_stack([np.tile(p_cluster, (m, 1)), px])
        samples = w * op(q, p) / math.factorial(n)
        values[n] = float(np.mean(samples))
        errs[n] = float(np.std(samples, ddof=1)) / math.sqrt(m)
    return values, errs


def marginal_functional(s: int, t: float, F1: OneParticleDistribution,
                        sigma: float, trunc: TruncationSpec, xs,
                        collisionless: bool = False,
                        strict: bool = False,
                        renormalized: bool = False) -> SeriesEstimate:
    """Series for the s-particle marginal functional of the state at xs.

    xs holds the s cluster phase points as an (s, 2) array.  Order n
    applies the (1+n)th-order evolution operator to the product of
    one-particle functions and integrates the n field particles.
    """
    if s not in (2, 3):
        raise ValueError("marginal functionals support s in {2, 3}")
    if trunc.order > 2:
        raise ValueError("functional series capped at order 2")
    if F1.dim != 1:
        raise ValueError("series drivers operate on 1D distributions")
    guard = check_norm_guard(F1, "functional", s=s, strict=strict)
    xs = _as_points(xs)
    if xs.shape[0] != s:
        raise ValueError(f"need exactly s={s} cluster phase points")
    values, errs = _functional_orders(s, t, F1, sigma, trunc, xs,
                                      collisionless, renormalized)
    return SeriesEstimate(
        points=xs, orders=values[:, None], errors=errs[:, None],
        norm_guard=guard,
        metadata={"s": s, "t": t, "sigma": sigma, "order": trunc.order,
                  "mc_samples": trunc.mc_samples, "seed": trunc.seed,
                  "renormalized": renormalized,
                  "collisionless": collisionless})


def renormalized_marginal_functional(s: int, t: float,
                                     F1: OneParticleDistribution,
                                     sigma: float, trunc: TruncationSpec,
                                     xs, collisionless: bool = False,
                                     strict: bool = False) -> SeriesEstimate:
    """Marginal functional evaluated with the renormalized operators."""
    return marginal_functional(s, t, F1, sigma, trunc, xs,
                               collisionless=collisionless, strict=strict,
                               renormalized=True)


def correlation_g2(t: float, F1: OneParticleDistribution, sigma: float,
                   trunc: TruncationSpec, x1, x2,
                   collisionless: bool = False,
                   strict: bool = False) -> SeriesEstimate:
    """Two-particle correlation functional: F2 minus the product F1 F1.

    Shares estimator samples with the marginal functional (same seed), so
    the cluster identity F2 = F1 F1 + G2 holds to rounding by construction.
    """
    xs = _as_points([x1, x2])
    guard = check_norm_guard(F1, "functional", s=2, strict=strict)
    values, errs = _functional_orders(2, t, F1, sigma, trunc, xs,
                                      collisionless, renormalized=False)
    prod = float(np.prod(F1.evaluate_qp(xs[:, :1], xs[:, 1:2])))
    values = values.copy()
    values[0] -= prod
    return SeriesEstimate(
        points=xs, orders=values[:, None], errors=errs[:, None],
        norm_guard=guard,
        metadata={"t": t, "sigma": sigma, "order": trunc.order,
                  "mc_samples": trunc.mc_samples, "seed": trunc.seed,
                  "f1_product": prod, "collisionless": collisionless})


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------

def _quadrature_grid(F: OneParticleDistribution, n_q: int, n_p: int):
    from .distributions import AnalyticSeparable, BoxProfile, \
        GaussianProfile, Grid1D
    if isinstance(F, Grid1D):
        qc, pc = F.centers()
        return qc, pc, F.dq, F.dp
    if isinstance(F, AnalyticSeparable):
        def prof_range(prof):
            if isinstance(prof, BoxProfile):
                return float(prof.lo[0]), float(prof.hi[0])
            return (float(prof.mean[0] - 8 * prof.std[0]),
                    float(prof.mean[0] + 8 * prof.std[0]))
        qlo, qhi = prof_range(F.spatial)
        plo, phi = prof_range(F.momentum)
        dq = (qhi - qlo) / n_q
        dp = (phi - plo) / n_p
        qc = qlo + (np.arange(n_q) + 0.5) * dq
        pc = plo + (np.arange(n_p) + 0.5) * dp
        return qc, pc, dq, dp
    raise ValueError("quadrature grids support Grid1D and AnalyticSeparable")


def mean_observable(a1: Callable, F1_est: OneParticleDistribution,
                    n_q: int = 400, n_p: int = 400) -> float:
    """Mean of a one-particle observable by the representation's quadrature."""
    from .distributions import ParticleEnsemble
    if isinstance(F1_est, ParticleEnsemble):
        return float(np.sum(F1_est.weights
                            * a1(F1_est.q[:, 0], F1_est.p[:, 0])))
    qc, pc, dq, dp = _quadrature_grid(F1_est, n_q, n_p)
    qq, pp = np.meshgrid(qc, pc, indexing="ij")
    vals = F1_est.evaluate_qp(qq[..., None], pp[..., None])
    return float(np.sum(a1(qq, pp) * vals) * dq * dp)


def dispersion_additive(a1: Callable, F1_est: OneParticleDistribution,
                        G2_est: Optional[Callable] = None,
                        n_q: int = 200, n_p: int = 200) -> float:
    """Dispersion of an additive observable, with the pair-correlation term.

    G2_est(q1, p1, q2, p2) is the correlation functional; None means the
    uncorrelated case, which reduces to the independent-particle result.
    """
    mean = mean_observable(a1, F1_est, n_q, n_p)
    base = mean_observable(lambda q, p: a1(q, p) ** 2 - mean ** 2,
                           F1_est, n_q, n_p)
    if G2_est is None:
        return base
    qc, pc, dq, dp = _quadrature_grid(F1_est, n_q, n_p)
    qq, pp = np.meshgrid(qc, pc, indexing="ij")
    a_vals = (a1(qq, pp)).ravel()
    cell = dq * dp
    # pair quadrature on the tensor grid
    q_flat = qq.ravel()
    p_flat = pp.ravel()
    g2 = G2_est(q_flat[:, None], p_flat[:, None],
                q_flat[None, :], p_flat[None, :])
    corr = float(a_vals @ g2 @ a_vals) * cell * cell
    return base + corr


# --------------------------------------------------------------------------
# product formula check
# --------------------------------------------------------------------------

@dataclass
class ProductFormulaReport:
    lhs: float
    rhs: float
    residual: float
    combined_std_error: float
    per_point: list


def verify_product_formula(t: float, F0: OneParticleDistribution,
                           sigma: float, trunc: TruncationSpec,
                           points, collisionless: bool = False
                           ) -> ProductFormulaReport:
    """Compare the product of truncated series against the series of products.

    Both sides are truncated at total field order 1 with paired samples,
    so the residual is exactly the sum of cross products of order-1
    estimates; its linearized standard error combines the per-point MC
    errors.
    """
    pts = _as_points(points)
    mm = pts.shape[0]
    if mm > 3:
        raise ValueError("product-formula check supports up to 3 factors")
    one = TruncationSpec(order=1, mc_samples=trunc.mc_samples,
                         seed=trunc.seed, p_cut=trunc.p_cut,
                         proposal_scale=trunc.proposal_scale)
    est = solve_f1_series(F0, t, sigma, one, pts,
                          collisionless=collisionless)
    A = est.orders[0]
    B = est.orders[1]
    Berr = est.errors[1]
    lhs = float(np.prod(A + B))
    rhs = float(np.prod(A))
    for i in range(mm):
        rhs += B[i] * float(np.prod(np.delete(A, i)))
    # linearized error of the residual (second order in the B-hats)
    combined = 0.0
    for i in range(mm):
        for j in range(i + 1, mm):
            rest = abs(float(np.prod(np.delete(A + B, [i, j]))))
            combined += (Berr[i] * abs(B[j]) + Berr[j] * abs(B[i])) * rest
    per_point = [{"A": float(A[i]), "B": float(B[i]), "B_err": float(Berr[i])}
                 for i in range(mm)]
    return ProductFormulaReport(lhs=lhs, rhs=rhs, residual=lhs - rhs,
                                combined_std_error=combined,
                                per_point=per_point)


# --------------------------------------------------------------------------
# event-driven ensemble oracle
# --------------------------------------------------------------------------

@dataclass
class EnsembleHistogram:
    q_edges: Array
    p_edges: Array
    density: Array        # one-particle density estimate per bin
    std_error: Array      # Poisson per-bin error
    counts: Array
    runs: int
    rejected: int


def sample_chaos_rod_state(rng, F0: OneParticleDistribution, n: int,
                           sigma: float, max_tries: int = 10_000):
    """Draw an allowed n-rod initial state from the chaos initial data."""
    for _ in range(max_tries):
        q, p = F0.sample_qp(rng, n)
        if is_allowed(q, sigma):
            return SystemState(q, p, sigma)
    raise RuntimeError("chaos sampling kept hitting forbidden configurations")


def md_ensemble_histogram(F0: OneParticleDistribution, n_particles: int,
                          sigma: float, t: float, runs: int,
                          q_edges, p_edges, seed: int = 0
                          ) -> EnsembleHistogram:
    """Event-driven hard-rod ensemble, histogrammed at time t.

    Initial states are chaos-sampled (iid one-particle draws conditioned
    on no overlap); each run evolves by the event-driven flow.  The
    histogram of all particles normalized per run and bin area estimates
    the one-particle function (mass n_particles).  Pathological initial
    states are resampled and counted.
    """
    rng = np.random.default_rng(seed)
    q_edges = np.asarray(q_edges, dtype=float)
    p_edges = np.asarray(p_edges, dtype=float)
    counts = np.zeros((len(q_edges) - 1, len(p_edges) - 1))
    rejected = 0
    done = 0
    while done < runs:
        state = sample_chaos_rod_state(rng, F0, n_particles, sigma)
        try:
            out = evolve(state, t)
        except PathologicalEvent:
            rejected += 1
            continue
        h, _, _ = np.histogram2d(out.q[:, 0], out.p[:, 0],
                                 bins=(q_edges, p_edges))
        counts += h
        done += 1
    area = np.outer(np.diff(q_edges), np.diff(p_edges))
    density = counts / (runs * area)
    std = np.sqrt(np.maximum(counts, 1.0)) / (runs * area)
    return EnsembleHistogram(q_edges=q_edges, p_edges=p_edges,
                             density=density, std_error=std, counts=counts,
                             runs=runs, rejected=rejected)


def series_on_grid(F0: OneParticleDistribution, t: float, sigma: float,
                   trunc: TruncationSpec, q_edges, p_edges,
                   collisionless: bool = False) -> SeriesEstimate:
    """Series estimate at the centers of a histogram grid."""
    q_edges = np.asarray(q_edges, dtype=float)
    p_edges = np.asarray(p_edges, dtype=float)
    qc = 0.5 * (q_edges[:-1] + q_edges[1:])
    pc = 0.5 * (p_edges[:-1] + p_edges[1:])
    qq, pp = np.meshgrid(qc, pc, indexing="ij")
    pts = np.column_stack([qq.ravel(), pp.ravel()])
    return solve_f1_series(F0, t, sigma, trunc, pts,
                           collisionless=collisionless)


# --------------------------------------------------------------------------
# weak form of the kinetic equation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported test function phi(q, p) with gradient."""

    value: Callable
    dq: Callable
    q_lo: float
    q_hi: float
    p_lo: float
    p_hi: float


def bump_test_function(q_center: float, q_width: float,
                       p_center: float = 0.0, p_width: float = 4.0
                       ) -> TestFunction:
    """Standard mollifier bump, infinitely smooth with compact support."""

    def b(u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) < 1.0
        safe = np.where(inside, u, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe ** 2)), 0.0)

    def db(u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) < 1.0
        safe = np.where(inside, u, 0.0)
        v = np.exp(1.0 - 1.0 / (1.0 - safe ** 2))
        return np.where(inside, v * (-2.0 * safe) / (1.0 - safe ** 2) ** 2,
                        0.0)

    def value(q, p):
        return b((np.asarray(q) - q_center) / q_width) \
            * b((np.asarray(p) - p_center) / p_width)

    def dq(q, p):
        return db((np.asarray(q) - q_center) / q_width) / q_width \
            * b((np.asarray(p) - p_center) / p_width)

    return TestFunction(value=value, dq=dq,
                        q_lo=q_center - q_width, q_hi=q_center + q_width,
                        p_lo=p_center - p_width, p_hi=p_center + p_width)


@dataclass
class WeakFormReport:
    dt: float
    time_derivative: float
    transport: float
    collision: float
    residual: float
    combined_std_error: float
    metadata: dict = field(default_factory=dict)


def _phi_functional_samples(phi, F0, sigma, s_times, trunc, rng,
                            collisionless):
    """Per-sample estimates of (phi, F1(s)) for each time s, shared samples.

    Returns an array (len(s_times), m) whose row means estimate the
    functional at each time.  Order <= 1 truncation.
    """
    m = trunc.mc_samples
    scale = trunc.scale_for(F0)
    cut = trunc.cut_for(F0)
    drift = float(momentum_drift(F0)[0])
    L_q = phi.q_hi - phi.q_lo
    q1 = rng.uniform(phi.q_lo, phi.q_hi, m)
    p1, pdf1 = _gaussian_proposal(rng, m, 1, drift, scale)
    p1 = p1[:, 0]
    w1 = L_q / pdf1[:, 0]
    s_max = max(abs(s) for s in s_times)
    radius = sigma + s_max * cut
    lo = np.minimum(q1, q1 - s_max * p1) - radius
    hi = np.maximum(q1, q1 - s_max * p1) + radius
    length = hi - lo
    q2 = lo + rng.uniform(0.0, 1.0, m) * length
    p2, pdf2 = _gaussian_proposal(rng, m, 1, drift, scale)
    p2 = p2[:, 0]
    w2 = length / pdf2[:, 0]
    phi_vals = phi.value(q1, p1)
    chaos = _chaos_fvec(F0, sigma)
    out = np.empty((len(s_times), m))
    q_pair = np.column_stack([q1, q2])
    p_pair = np.column_stack([p1, p2])
    for row, s in enumerate(s_times):
        term0 = F0.evaluate_qp((q1 - s * p1)[:, None], p1[:, None])
        if trunc.order >= 1:
            cum = cumulant_batch(s, (0,), (1,), chaos, q_pair, p_pair,
                                 sigma, collisionless)
            out[row] = w1 * phi_vals * (term0 + w2 * cum)
        else:
            out[row] = w1 * phi_vals * term0
    return out


def weak_form_residual(phi: TestFunction, t: float, dt: float,
                       F0: OneParticleDistribution, sigma: float,
                       trunc: TruncationSpec,
                       collisionless: bool = False) -> WeakFormReport:
    """Residual of the weak kinetic equation at matched truncation.

    Central finite difference of the phi-functional against the transport
    term plus the contact-exchange collision term; all three estimated
    with shared samples.  The truncation is matched degree-by-degree in
    the initial data (order <= 1 keeps total degree <= 2), for which the
    weak identity holds exactly up to O(dt^2) and MC noise.
    """
    if trunc.order > 1:
        raise ValueError("weak-form residual supports order <= 1")
    if F0.dim != 1:
        raise ValueError("series drivers operate on 1D distributions")
    rng = np.random.default_rng(trunc.seed)
    m = trunc.mc_samples

    fd_rows = _phi_functional_samples(phi, F0, sigma, (t + dt, t - dt),
                                      trunc, rng, collisionless)
    fd_samples = (fd_rows[0] - fd_rows[1]) / (2.0 * dt)
    fd = float(np.mean(fd_samples))
    fd_err = float(np.std(fd_samples, ddof=1)) / math.sqrt(m)

    phi_dq = TestFunction(
        value=lambda q, p: np.asarray(p) * phi.dq(q, p),
        dq=phi.dq, q_lo=phi.q_lo, q_hi=phi.q_hi,
        p_lo=phi.p_lo, p_hi=phi.p_hi)
    tr_rows = _phi_functional_samples(phi_dq, F0, sigma, (t,), trunc, rng,
                                      collisionless)
    transport = float(np.mean(tr_rows[0]))
    transport_err = float(np.std(tr_rows[0], ddof=1)) / math.sqrt(m)

    # contact-exchange collision term at matched degree: both one-particle
    # factors enter at order 0 (free-streamed initial data).  Collisionless
    # dynamics has no boundary term, so the equation is pure transport.
    if collisionless:
        collision = 0.0
        collision_err = 0.0
    else:
        scale = trunc.scale_for(F0)
        drift = float(momentum_drift(F0)[0])
        L_q = phi.q_hi - phi.q_lo
        q1 = rng.uniform(phi.q_lo, phi.q_hi, m)
        pa, pdf_a = _gaussian_proposal(rng, m, 1, drift, scale)
        pb, pdf_b = _gaussian_proposal(rng, m, 1, drift, scale)
        pa = pa[:, 0]
        pb = pb[:, 0]
        w = L_q / (pdf_a[:, 0] * pdf_b[:, 0])

        def G(q, p):
            return F0.evaluate_qp((q - t * p)[:, None], p[:, None])

        coll_samples = np.zeros(m)
        phi_a = phi.value(q1, pa)
        phi_b = phi.value(q1, pb)
        for eta in (-1.0, 1.0):
            rel = eta * (pa - pb)
            kern = np.where(rel > 0.0, rel, 0.0)
            coll_samples += kern * (phi_b - phi_a) * G(q1, pa) \
                * G(q1 + eta * sigma, pb)
        coll_samples *= w
        collision = float(np.mean(coll_samples))
        collision_err = float(np.std(coll_samples, ddof=1)) / math.sqrt(m)

    residual = abs(fd - transport - collision)
    combined = math.sqrt(fd_err ** 2 + transport_err ** 2
                         + collision_err ** 2)
    return WeakFormReport(
        dt=dt, time_derivative=fd, transport=transport, collision=collision,
        residual=residual, combined_std_error=combined,
        metadata={"t": t, "order": trunc.order, "mc_samples": m,
                  "seed": trunc.seed, "collisionless": collisionless})


def weak_form_richardson(phi: TestFunction, t: float,
                         F0: OneParticleDistribution, sigma: float,
                         trunc: TruncationSpec,
                         dts: Optional[Sequence[float]] = None,
                         collisionless: bool = False):
    """Weak-form residuals over a dt ladder with a Richardson estimate of C.

    The finite-difference error is C dt^2 to leading order; C is estimated
    from the two largest dt values and reported with the per-dt residuals.
    """
    if dts is None:
        dts = (t / 25.0, t / 50.0, t / 100.0)
    dts = sorted(dts, reverse=True)
    reports = [weak_form_residual(phi, t, dt, F0, sigma, trunc,
                                  collisionless=collisionless)
               for dt in dts]
    d0, d1 = reports[0], reports[1]
    denom = dts[0] ** 2 - dts[1] ** 2
    C = abs(d0.time_derivative - d1.time_derivative) / denom
    return reports, C
