"""Collision integrals: Boltzmann-Enskog, generalized-series terms, 1D rods,
and the Mayer-function first correction of the revised Enskog equation.

The Monte Carlo estimators use matched samples for gain and loss so that
detailed-balance zeros cancel pointwise instead of drowning in variance.
Reductions are fixed-order for run-to-run determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .distributions import (
    OneParticleDistribution,
    evaluate,
    momentum_scale,
)
from .flow import ALLOWED_RTOL, SystemState, collision_map
from .operators import (
    OperatorEvalRequest,
    scattering_image,
    v_general,
)

Array = np.ndarray


@dataclass(frozen=True)
class QuadratureSpec:
    """Hemisphere/momentum quadrature configuration.

    With eta_nodes and p2_nodes set, evaluation is deterministic
    (std_error 0); otherwise plain MC with the given sample count.  The
    momentum proposal is an isotropic Gaussian centered at p2_drift with
    the given scale (both default to the distribution's moments); samples
    beyond p2_cutoff_sigmas proposal widths are dropped and the neglected
    tail probability is reported.
    """

    mc_samples: int = 20_000
    seed: int = 0
    p2_scale: Optional[float] = None
    p2_drift: Optional[Sequence[float]] = None
    p2_cutoff_sigmas: float = 8.0
    eta_nodes: Optional[tuple] = None      # (nodes (k,3), weights (k,))
    p2_nodes: Optional[tuple] = None       # (nodes (m,3), weights (m,))

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be positive")
        if self.p2_cutoff_sigmas <= 0:
            raise ValueError("cutoff must be positive")

    @property
    def deterministic(self) -> bool:
        return self.eta_nodes is not None and self.p2_nodes is not None


@dataclass(frozen=True)
class CollisionResult:
    """Gain/loss split of a collision integral with its MC error."""

    value: float
    std_error: float
    gain: float
    loss: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isclose(self.value, self.gain - self.loss,
                            rel_tol=0.0, abs_tol=1e-12 * max(
                                1.0, abs(self.gain) + abs(self.loss))):
            raise ValueError("value must equal gain - loss")


def sphere_product_nodes(n_polar: int, n_azimuth: int):
    """Deterministic unit-sphere nodes: Gauss-Legendre x uniform azimuth."""
    u, wu = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(n_azimuth) + 0.5) * 2.0 * math.pi / n_azimuth
    wphi = 2.0 * math.pi / n_azimuth
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    s = np.sqrt(1.0 - uu ** 2)
    nodes = np.stack([s * np.cos(pp), s * np.sin(pp), uu], axis=-1)
    weights = np.broadcast_to(wu[:, None] * wphi, uu.shape)
    return nodes.reshape(-1, 3), weights.reshape(-1).copy()


def gauss_hermite_momentum_nodes(n: int, scale: float, drift=(0, 0, 0)):
    """Tensor Gauss-Hermite nodes for a 3D momentum integral dp."""
    x, w = np.polynomial.hermite.hermgauss(n)
    # int h(p) dp = sum w_i e^{x_i^2} sqrt(2) s h(sqrt(2) s x_i) per axis
    pts_1d = math.sqrt(2.0) * scale * x
    wts_1d = w * np.exp(x ** 2) * math.sqrt(2.0) * scale
    P = np.stack(np.meshgrid(pts_1d, pts_1d, pts_1d, indexing="ij"),
                 axis=-1).reshape(-1, 3)
    W = np.prod(np.stack(np.meshgrid(wts_1d, wts_1d, wts_1d, indexing="ij"),
                         axis=-1).reshape(-1, 3), axis=-1)
    return P + np.asarray(drift, dtype=float), W


def momentum_drift(F: OneParticleDistribution) -> np.ndarray:
    """Mean momentum of F, used to center proposals."""
    from .distributions import AnalyticSeparable, GaussianProfile, Grid1D, \
        ParticleEnsemble
    if isinstance(F, AnalyticSeparable):
        prof = F.momentum
        if isinstance(prof, GaussianProfile):
            return prof.mean.copy()
        return np.zeros(F.dim)
    if isinstance(F, Grid1D):
        qc, pc = F.centers()
        w = F.values.sum(axis=0)
        if w.sum() <= 0:
            return np.zeros(1)
        return np.array([np.average(pc, weights=w)])
    if isinstance(F, ParticleEnsemble):
        return np.average(F.p, axis=0, weights=F.weights)
    return np.zeros(F.dim)


def mayer_f(q1, q2, sigma: float):
    """Mayer function: -1 on overlapping positions, 0 otherwise.

    Contact (|q1 - q2| = sigma) is an allowed configuration and maps to 0;
    the overlap threshold matches the flow's allowed-set predicate.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    dist = np.linalg.norm(np.atleast_1d(q1 - q2), axis=-1)
    out = np.where(dist < sigma * (1.0 - ALLOWED_RTOL), -1.0, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def chi2(q1, q2, sigma: float):
    """Two-particle allowed-configuration step function, 1 + mayer_f."""
    f = mayer_f(q1, q2, sigma)
    return 1.0 + f


def overlap_lens_volume(sigma: float) -> float:
    """Volume of the lens where both |x| < sigma and |x - d| < sigma, |d| = sigma."""
    return 5.0 * math.pi / 12.0 * sigma ** 3


# --------------------------------------------------------------------------
# sampling helpers
# --------------------------------------------------------------------------

def _draw_eta_p2(F, x1_p, quad: QuadratureSpec, rng):
    """Sampled (eta, p2, weight) covering the full d(eta) dp2 measure.

    MC mode: eta uniform on the sphere (weight 4 pi), p2 from the Gaussian
    proposal with importance weights, cutoff tail dropped.  Deterministic
    mode: tensor product of the node sets.
    """
    if quad.deterministic:
        eta_n, eta_w = quad.eta_nodes
        p_n, p_w = quad.p2_nodes
        eta = np.repeat(eta_n, len(p_n), axis=0)
        w_eta = np.repeat(eta_w, len(p_n))
        p2 = np.tile(p_n, (len(eta_n), 1))
        w_p = np.tile(p_w, len(eta_n))
        return eta, p2, w_eta * w_p, 0.0
    m = quad.mc_samples
    eta = rng.normal(size=(m, 3))
    eta /= np.linalg.norm(eta, axis=1, keepdims=True)
    scale = quad.p2_scale if quad.p2_scale is not None else momentum_scale(F)
    drift = (np.asarray(quad.p2_drift, dtype=float)
             if quad.p2_drift is not None else momentum_drift(F))
    z = rng.normal(size=(m, 3))
    p2 = drift + scale * z
    pdf = np.exp(-0.5 * np.sum(z ** 2, axis=1)) \
        / ((2 * math.pi) ** 1.5 * scale ** 3)
    w = 4.0 * math.pi / pdf
    cut = np.linalg.norm(z, axis=1) > quad.p2_cutoff_sigmas
    w[cut] = 0.0
    # chi-square(3) tail beyond the cutoff radius
    r = quad.p2_cutoff_sigmas
    tail = math.erfc(r / math.sqrt(2)) + math.sqrt(2 / math.pi) * r \
        * math.exp(-r * r / 2)
    return eta, p2, w, tail


def _mc_result(diff, gain, loss, weights, norm, mc: bool, meta: dict):
    """Assemble a CollisionResult with a fixed-order reduction.

    MC estimators average weighted samples; deterministic quadratures sum
    weighted nodes (std_error 0).
    """
    m = len(diff)
    if mc:
        gain_v = norm * float(np.mean(weights * gain))
        loss_v = norm * float(np.mean(weights * loss))
        std = norm * float(np.std(weights * diff, ddof=1)) / math.sqrt(m) \
            if m > 1 else 0.0
    else:
        gain_v = norm * float(np.sum(weights * gain))
        loss_v = norm * float(np.sum(weights * loss))
        std = 0.0
    return CollisionResult(value=gain_v - loss_v, std_error=std,
                           gain=gain_v, loss=loss_v, metadata=meta)


# --------------------------------------------------------------------------
# Boltzmann-Enskog integral
# --------------------------------------------------------------------------

def boltzmann_enskog(F: OneParticleDistribution, x1, sigma: float,
                     quad: QuadratureSpec) -> CollisionResult:
    """sigma^2 Int dp2 d(eta) <eta, p1-p2> [gain - loss] at the phase point x1.

    Gain pairs the starred momenta with the partner at q1 - sigma eta;
    loss pairs the unstarred momenta with the partner at q1 + sigma eta.
    The hemisphere constraint <eta, p1-p2> > 0 restricts full-sphere nodes.
    """
    if F.dim != 3:
        raise ValueError("boltzmann_enskog expects a 3D distribution")
    q1, p1 = np.asarray(x1[0], dtype=float), np.asarray(x1[1], dtype=float)
    rng = np.random.default_rng(quad.seed)
    eta, p2, w, tail = _draw_eta_p2(F, p1, quad, rng)
    k = np.sum(eta * (p1 - p2), axis=1)
    pos = k > 0.0
    k = np.where(pos, k, 0.0)
    p1s, p2s = collision_map(np.broadcast_to(p1, p2.shape), p2, eta)
    f_x1 = evaluate(F, (q1, p1))
    gain = k * evaluate(F, (np.broadcast_to(q1, p2.shape), p1s)) \
        * evaluate(F, (q1 - sigma * eta, p2s))
    loss = k * f_x1 * evaluate(F, (q1 + sigma * eta, p2))
    meta = {"samples": len(k), "p2_tail_prob": tail,
            "deterministic": quad.deterministic}
    return _mc_result(gain - loss, gain, loss, w, sigma ** 2,
                      not quad.deterministic, meta)


# --------------------------------------------------------------------------
# collision-invariant moments (spatially uniform F)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    number: float
    momentum: Array
    energy: float
    number_err: float
    momentum_err: Array
    energy_err: float


def collision_invariant_moments(F: OneParticleDistribution, sigma: float,
                                quad: QuadratureSpec,
                                q_ref=(0.0, 0.0, 0.0)) -> MomentReport:
    """Moments Int dp1 psi(p1) I_BEE for psi in {1, p, |p|^2}; all ~ 0.

    For spatially uniform F the starred change of variables plus particle
    relabeling turns the moment into the symmetrized form
    (sigma^2/2) Int <eta,dp>_+ [psi(p1*)+psi(p2*)-psi(p1)-psi(p2)] F F,
    which vanishes pointwise for collision invariants.
    """
    q_ref = np.asarray(q_ref, dtype=float)
    rng = np.random.default_rng(quad.seed)
    m = quad.mc_samples
    scale = quad.p2_scale if quad.p2_scale is not None else momentum_scale(F)
    drift = momentum_drift(F)
    eta = rng.normal(size=(m, 3))
    eta /= np.linalg.norm(eta, axis=1, keepdims=True)
    z1 = rng.normal(size=(m, 3))
    z2 = rng.normal(size=(m, 3))
    p1 = drift + scale * z1
    p2 = drift + scale * z2
    pdf = lambda z: np.exp(-0.5 * np.sum(z ** 2, axis=1)) \
        / ((2 * math.pi) ** 1.5 * scale ** 3)
    w = 4.0 * math.pi / (pdf(z1) * pdf(z2))
    k = np.sum(eta * (p1 - p2), axis=1)
    k = np.where(k > 0, k, 0.0)
    ff = evaluate(F, (np.broadcast_to(q_ref, p1.shape), p1)) \
        * evaluate(F, (np.broadcast_to(q_ref, p2.shape), p2))
    p1s, p2s = collision_map(p1, p2, eta)
    base = 0.5 * sigma ** 2 * w * k * ff

    def moment(vals):
        x = base * vals
        return (float(np.mean(x)),
                float(np.std(x, ddof=1)) / math.sqrt(m))

    num, num_err = moment(np.zeros(m))            # psi = 1 cancels exactly
    mom = np.empty(3)
    mom_err = np.empty(3)
    for ax in range(3):
        mom[ax], mom_err[ax] = moment(
            p1s[:, ax] + p2s[:, ax] - p1[:, ax] - p2[:, ax])
    en, en_err = moment(np.sum(p1s ** 2 + p2s ** 2 - p1 ** 2 - p2 ** 2,
                               axis=1))
    return MomentReport(number=num, momentum=mom, energy=en,
                        number_err=num_err, momentum_err=mom_err,
                        energy_err=en_err)


# --------------------------------------------------------------------------
# generalized Enskog collision-series terms
# --------------------------------------------------------------------------

def generalized_enskog_term(n: int, t: float, F: OneParticleDistribution,
                            x1, sigma: float, quad: QuadratureSpec,
                            mc_extra: int = 0,
                            extra_radius: Optional[float] = None,
                            p_cut: Optional[float] = None,
                            collisionless: bool = False) -> CollisionResult:
    """Order-n term of the collision-integral expansion at the point x1.

    The evolution operator of order 1+n acts on the contact pair (starred
    at q1 - sigma eta for the gain, plain at q1 + sigma eta for the loss)
    plus n integrated field particles; the operator sees the pair as its
    cluster.  Field positions are sampled in a ball around q1 whose radius
    covers the interaction horizon within [0, t]; the neglected horizon
    tail is reported, not silently dropped.
    """
    if n > 2:
        raise ValueError("operator order capped at n = 2")
    if F.dim != 3:
        raise ValueError("generalized_enskog_term expects a 3D distribution")
    if quad.deterministic:
        raise ValueError("operator-dressed terms support MC quadrature only")
    q1, p1 = np.asarray(x1[0], dtype=float), np.asarray(x1[1], dtype=float)
    rng = np.random.default_rng(quad.seed)
    eta, p2, w, tail = _draw_eta_p2(F, p1, quad, rng)
    m = len(w)
    scale = quad.p2_scale if quad.p2_scale is not None else momentum_scale(F)
    cut = p_cut if p_cut is not None else 6.0 * scale
    radius = extra_radius if extra_radius is not None else \
        sigma * (1.0 + 1e-9) + abs(t) * (cut + float(np.linalg.norm(p1)))
    vol = 4.0 / 3.0 * math.pi * radius ** 3

    # field particles: uniform ball positions, Gaussian momenta
    extras_q = np.empty((m, n, 3))
    extras_p = np.empty((m, n, 3))
    w_extra = np.ones(m)
    drift = momentum_drift(F)
    for j in range(n):
        direc = rng.normal(size=(m, 3))
        direc /= np.linalg.norm(direc, axis=1, keepdims=True)
        r = radius * rng.uniform(0.0, 1.0, m) ** (1.0 / 3.0)
        extras_q[:, j] = q1 + direc * r[:, None]
        z = rng.normal(size=(m, 3))
        extras_p[:, j] = drift + scale * z
        pdf = np.exp(-0.5 * np.sum(z ** 2, axis=1)) \
            / ((2 * math.pi) ** 1.5 * scale ** 3)
        w_extra *= vol / pdf

    k = np.sum(eta * (p1 - p2), axis=1)
    pos = k > 0.0
    p1s, p2s = collision_map(np.broadcast_to(p1, p2.shape), p2, eta)

    def f_product(state: SystemState) -> float:
        return float(np.prod(evaluate(F, (state.q, state.p))))

    gain = np.zeros(m)
    loss = np.zeros(m)
    for i in range(m):
        if not pos[i] or w[i] == 0.0:
            continue
        gq = np.vstack([q1, q1 - sigma * eta[i], extras_q[i]])
        gp = np.vstack([p1s[i], p2s[i], extras_p[i]])
        lq = np.vstack([q1, q1 + sigma * eta[i], extras_q[i]])
        lp = np.vstack([p1, p2[i], extras_p[i]])
        req_g = OperatorEvalRequest(
            s=2, n=n, t=t, f=f_product,
            x=SystemState(gq, gp, sigma), collisionless=collisionless)
        req_l = OperatorEvalRequest(
            s=2, n=n, t=t, f=f_product,
            x=SystemState(lq, lp, sigma), collisionless=collisionless)
        gain[i] = k[i] * v_general(req_g)
        loss[i] = k[i] * v_general(req_l)

    norm = sigma ** 2 / math.factorial(n)
    meta = {"samples": m, "order": n, "t": t, "extra_radius": radius,
            "p2_tail_prob": tail, "p_cut": cut,
            "horizon_note": "field particles outside the sampling ball "
                            "or faster than p_cut are neglected"}
    return _mc_result(gain - loss, gain, loss, w * w_extra, norm,
                      not quad.deterministic, meta)


# --------------------------------------------------------------------------
# 1D hard-rod collision integral
# --------------------------------------------------------------------------

def hard_rod_integral(F2: Callable, x1, sigma: float, p_scale: float = 1.0,
                      n_nodes: int = 40, method: str = "laguerre",
                      mc_samples: int = 50_000, seed: int = 0) -> CollisionResult:
    """Four-term 1D collision integral Int_0^inf dP P [...] for hard rods.

    F2(qa, pa, qb, pb) evaluates the two-particle functional at arrays of
    scalar coordinates.  Gain collects the terms with a modified first
    momentum (partners at -sigma and +sigma contact); loss the other two.
    Quadrature is scaled Gauss-Laguerre by default, or an exponential-
    proposal MC when method="mc".
    """
    q1, p1 = float(np.atleast_1d(x1[0])[0]), float(np.atleast_1d(x1[1])[0])
    if method == "laguerre":
        x, wl = np.polynomial.laguerre.laggauss(n_nodes)
        P = p_scale * x
        w = p_scale * wl * np.exp(x)      # summed: int g = s sum w_i e^x g(s x)
        mc = False
    elif method == "mc":
        rng = np.random.default_rng(seed)
        P = rng.exponential(p_scale, mc_samples)
        w = p_scale * np.exp(P / p_scale)  # averaged importance weights
        mc = True
    else:
        raise ValueError("method must be 'laguerre' or 'mc'")
    gain = P * (F2(q1, p1 - P, q1 - sigma, p1)
                + F2(q1, p1 + P, q1 + sigma, p1))
    loss = P * (F2(q1, p1, q1 - sigma, p1 + P)
                + F2(q1, p1, q1 + sigma, p1 - P))
    meta = {"method": method, "nodes": len(P), "p_scale": p_scale}
    return _mc_result(gain - loss, gain, loss, w, 1.0, mc, meta)


# --------------------------------------------------------------------------
# revised Enskog first correction and its Markovian counterpart
# --------------------------------------------------------------------------

def _draw_third_particle(q1, F, quad, rng, radius):
    m = quad.mc_samples if not quad.deterministic else len(quad.p2_nodes[0])
    direc = rng.normal(size=(m, 3))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, m) ** (1.0 / 3.0)
    q3 = q1 + direc * r[:, None]
    scale = quad.p2_scale if quad.p2_scale is not None else momentum_scale(F)
    drift = momentum_drift(F)
    z = rng.normal(size=(m, 3))
    p3 = drift + scale * z
    pdf = np.exp(-0.5 * np.sum(z ** 2, axis=1)) \
        / ((2 * math.pi) ** 1.5 * scale ** 3)
    vol = 4.0 / 3.0 * math.pi * radius ** 3
    return q3, p3, vol / pdf


def revised_enskog_first_correction(F: OneParticleDistribution, x1,
                                    sigma: float, quad: QuadratureSpec,
                                    x3_radius_factor: float = 1.0
                                    ) -> CollisionResult:
    """First Mayer-graph correction of the revised Enskog collision integral.

    The third-particle spatial integrand f(q1,q3) f(q1 -+ sigma eta, q3)
    is supported on the lens of two overlapping sigma-balls; positions are
    sampled in the ball around q1 whose radius covers it.
    """
    if F.dim != 3:
        raise ValueError("expects a 3D distribution")
    if quad.deterministic:
        raise ValueError("three-particle corrections support MC quadrature only")
    q1, p1 = np.asarray(x1[0], dtype=float), np.asarray(x1[1], dtype=float)
    rng = np.random.default_rng(quad.seed)
    eta, p2, w, tail = _draw_eta_p2(F, p1, quad, rng)
    radius = sigma * x3_radius_factor
    q3, p3, w3 = _draw_third_particle(q1, F, quad, rng, radius)
    k = np.sum(eta * (p1 - p2), axis=1)
    k = np.where(k > 0, k, 0.0)
    p1s, p2s = collision_map(np.broadcast_to(p1, p2.shape), p2, eta)
    f3 = evaluate(F, (q3, p3))
    f_13 = mayer_f(np.broadcast_to(q1, q3.shape), q3, sigma)
    gain = k * f_13 * mayer_f(q1 - sigma * eta, q3, sigma) \
        * evaluate(F, (np.broadcast_to(q1, p2.shape), p1s)) \
        * evaluate(F, (q1 - sigma * eta, p2s)) * f3
    loss = k * f_13 * mayer_f(q1 + sigma * eta, q3, sigma) \
        * evaluate(F, (np.broadcast_to(q1, p2.shape), p1)) \
        * evaluate(F, (q1 + sigma * eta, p2)) * f3
    meta = {"samples": len(k), "x3_radius": radius, "p2_tail_prob": tail,
            "lens_volume_closed_form": overlap_lens_volume(sigma)}
    return _mc_result(gain - loss, gain, loss, w * w3, sigma ** 2,
                      not quad.deterministic, meta)


def markovian_first_correction(F: OneParticleDistribution, x1, sigma: float,
                               quad: QuadratureSpec,
                               t_grid: Optional[Sequence[float]] = None,
                               x3_radius_factor: float = 1.0,
                               collisionless_third: bool = False
                               ) -> CollisionResult:
    """First correction in the Markovian limit, via scattering operators.

    Evaluates the bracket X2 X2 S3^ - X2 S2^(1,3) - X2 S2^(2,3) + 1 applied
    to the product of one-particle functions, with the scattering maps
    realized as backward-flow plateaus on t_grid.  With
    collisionless_third=True all operators touching the third particle are
    forced to the identity, which reproduces the revised-Enskog correction
    integrand pointwise.  Recollision chains outside the sampling ball are
    neglected (reported in metadata).
    """
    if F.dim != 3:
        raise ValueError("expects a 3D distribution")
    if quad.deterministic:
        raise ValueError("three-particle corrections support MC quadrature only")
    q1, p1 = np.asarray(x1[0], dtype=float), np.asarray(x1[1], dtype=float)
    rng = np.random.default_rng(quad.seed)
    eta, p2, w, tail = _draw_eta_p2(F, p1, quad, rng)
    radius = sigma * x3_radius_factor
    q3, p3, w3 = _draw_third_particle(q1, F, quad, rng, radius)
    k = np.sum(eta * (p1 - p2), axis=1)
    pos = k > 0.0
    p1s, p2s = collision_map(np.broadcast_to(p1, p2.shape), p2, eta)

    def f_product(state: SystemState) -> float:
        return float(np.prod(evaluate(F, (state.q, state.p))))

    def bracket(qa, pa, qb, pb, i):
        x = SystemState(np.vstack([qa, qb, q3[i]]),
                        np.vstack([pa, pb, p3[i]]), sigma)
        chi_a = chi2(qa, q3[i], sigma)
        chi_b = chi2(qb, q3[i], sigma)
        if collisionless_third:
            v = f_product(x)
            return (chi_a * chi_b - chi_a - chi_b + 1.0) * v
        # the chi prefactors gate the flows: a vanishing factor also means
        # the corresponding subsystem may be forbidden, so skip its image
        term = f_product(x)
        if chi_a * chi_b != 0.0:
            term += chi_a * chi_b * f_product(
                scattering_image(x, (0, 1, 2), t_grid))
        if chi_a != 0.0:
            term -= chi_a * f_product(scattering_image(x, (0, 2), t_grid))
        if chi_b != 0.0:
            term -= chi_b * f_product(scattering_image(x, (1, 2), t_grid))
        return term

    m = len(k)
    gain = np.zeros(m)
    loss = np.zeros(m)
    for i in range(m):
        if not pos[i] or w[i] == 0.0 or w3[i] == 0.0:
            continue
        gain[i] = k[i] * bracket(q1, p1s[i], q1 - sigma * eta[i], p2s[i], i)
        loss[i] = k[i] * bracket(q1, p1, q1 + sigma * eta[i], p2[i], i)
    meta = {"samples": m, "x3_radius": radius, "p2_tail_prob": tail,
            "collisionless_third": collisionless_third,
            "chain_note": "recollision chains outside the sampling ball "
                          "are neglected"}
    return _mc_result(gain - loss, gain, loss, w * w3, sigma ** 2,
                      not quad.deterministic, meta)
