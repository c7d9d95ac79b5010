"""Distribution representations: evaluation, norms, sampling, chaos data."""

import math

import numpy as np
import pytest
from scipy import stats

from enskog.distributions import (
    AnalyticSeparable,
    BoxProfile,
    GaussianProfile,
    Grid1D,
    InitialChaosData,
    NormGuardError,
    ParticleEnsemble,
    chaos_product,
    chaos_product_batch,
    check_norm_guard,
    evaluate,
    l1_norm,
    maxwellian,
    sample,
)
from enskog.flow import PhasePoint


def unit_box_maxwellian(density=1.0, temperature=1.0):
    return AnalyticSeparable(
        spatial=BoxProfile(lo=[0.0], hi=[1.0], density=density),
        momentum=maxwellian(temperature, dim=1),
    )


# ---------------------------------------------------------------- evaluate

def test_evaluate_maxwellian_normalization_constant():
    F = unit_box_maxwellian()
    val = evaluate(F, PhasePoint([0.5], [0.0]))
    assert val == pytest.approx((2 * math.pi) ** -0.5, abs=1e-12)
    assert val == pytest.approx(0.39894, abs=1e-5)


def test_evaluate_outside_grid_support_is_zero():
    grid = Grid1D(0.0, 1.0, -2.0, 2.0, np.ones((4, 4)))
    assert evaluate(grid, ([5.0], [0.0])) == 0.0
    assert evaluate(grid, ([0.5], [3.0])) == 0.0
    assert evaluate(grid, ([0.5], [0.0])) == pytest.approx(1.0)


def test_evaluate_ensemble_kde_nonnegative():
    rng = np.random.default_rng(0)
    ens = ParticleEnsemble(q=rng.normal(size=(50, 1)),
                           p=rng.normal(size=(50, 1)),
                           weights=np.full(50, 0.02),
                           position_bandwidth=0.025)
    pts = rng.normal(size=(100, 1)), rng.normal(size=(100, 1))
    assert np.all(evaluate(ens, pts) >= 0)


def test_evaluate_dimension_mismatch():
    F = unit_box_maxwellian()
    with pytest.raises(ValueError):
        evaluate(F, ([0.5, 0.5, 0.5], [0.0, 0.0, 0.0]))


def test_evaluate_broadcasts():
    F = unit_box_maxwellian()
    q = np.linspace(0, 1, 7)[:, None]
    p = np.zeros((7, 1))
    vals = evaluate(F, (q, p))
    assert vals.shape == (7,)
    assert np.allclose(vals, (2 * math.pi) ** -0.5)


# ----------------------------------------------------------------- l1 norm

def test_l1_norm_normalized_product():
    assert l1_norm(unit_box_maxwellian()) == pytest.approx(1.0, abs=1e-12)


def test_l1_norm_ensemble_weight_sum():
    ens = ParticleEnsemble(q=np.zeros((100, 1)), p=np.zeros((100, 1)),
                           weights=np.full(100, 0.01),
                           position_bandwidth=0.1)
    assert l1_norm(ens) == pytest.approx(1.0, abs=1e-15)


def test_l1_norm_grid_converges_with_mesh():
    # scaled Gaussian of mass 0.3 discretized on refining meshes
    def build(n):
        h = 8.0 / n
        c = -4.0 + (np.arange(n) + 0.5) * h
        qq, pp = np.meshgrid(c, c, indexing="ij")
        vals = 0.3 * np.exp(-0.5 * (qq ** 2 + pp ** 2)) / (2 * math.pi)
        return Grid1D(-4, 4, -4, 4, vals)

    # the mesh sum converges to the mass restricted to the box
    boxed_mass = 0.3 * math.erf(4 / math.sqrt(2)) ** 2
    coarse = abs(l1_norm(build(40)) - boxed_mass)
    fine = abs(l1_norm(build(160)) - boxed_mass)
    assert fine < coarse / 4    # second-order midpoint rule
    assert abs(l1_norm(build(160)) - 0.3) < 5e-4


# ----------------------------------------------------------------- sampling

def test_sample_maxwellian_clt_bound():
    F = unit_box_maxwellian()
    q, p = sample(F, np.random.default_rng(12), size=100_000)
    assert abs(np.mean(p)) <= 4.0 * (1.0 / 100_000) ** 0.5


def test_sample_uniform_spatial_ks():
    F = unit_box_maxwellian()
    q, p = sample(F, np.random.default_rng(4), size=20_000)
    stat = stats.kstest(q[:, 0], "uniform").statistic
    assert stat < 1.63 / math.sqrt(20_000)   # 1% critical value


def test_sample_deterministic_for_fixed_seed():
    F = unit_box_maxwellian()
    a = sample(F, 99, size=50)
    b = sample(F, 99, size=50)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sample_single_returns_phase_point():
    pt = sample(unit_box_maxwellian(), 3)
    assert isinstance(pt, PhasePoint) and pt.dim == 1


def test_sample_grid_matches_distribution():
    vals = np.zeros((2, 2))
    vals[1, 1] = 1.0
    grid = Grid1D(0.0, 2.0, 0.0, 2.0, vals)
    q, p = sample(grid, 7, size=500)
    assert np.all(q >= 1.0) and np.all(p >= 1.0)


def test_sample_zero_distribution_rejected():
    F = AnalyticSeparable(BoxProfile([0.0], [1.0], density=0.0),
                          maxwellian(1.0, 1))
    with pytest.raises(ValueError):
        sample(F, 0)


# -------------------------------------------------------------- chaos data

def test_chaos_product_forbidden_pair_is_zero():
    data = InitialChaosData(f1=unit_box_maxwellian(), s=2, sigma=0.5)
    x1 = PhasePoint([0.5], [0.0])
    x2 = PhasePoint([0.6], [0.0])
    assert chaos_product(data, x1, x2) == 0.0


def test_chaos_product_single_particle():
    data = InitialChaosData(f1=unit_box_maxwellian(), s=1, sigma=0.5)
    x = PhasePoint([0.5], [0.3])
    assert chaos_product(data, x) == pytest.approx(evaluate(data.f1, x))


def test_chaos_product_separated_product():
    F = unit_box_maxwellian()
    data = InitialChaosData(f1=F, s=2, sigma=0.05)
    x1 = PhasePoint([0.2], [0.1])
    x2 = PhasePoint([0.8], [-0.4])
    expected = evaluate(F, x1) * evaluate(F, x2)
    assert chaos_product(data, x1, x2) == pytest.approx(expected, rel=1e-12)


def test_chaos_product_symmetric():
    data = InitialChaosData(f1=unit_box_maxwellian(), s=3, sigma=0.05)
    pts = [PhasePoint([0.2], [0.1]), PhasePoint([0.5], [0.0]),
           PhasePoint([0.9], [-1.0])]
    a = chaos_product(data, *pts)
    b = chaos_product(data, pts[2], pts[0], pts[1])
    assert a == b


def test_chaos_product_batch_matches_scalar():
    F = unit_box_maxwellian()
    rng = np.random.default_rng(5)
    q = rng.uniform(0, 1, size=(20, 2, 1))
    p = rng.normal(size=(20, 2, 1))
    batch = chaos_product_batch(F, q, p, sigma=0.1)
    data = InitialChaosData(f1=F, s=2, sigma=0.1)
    for row in range(20):
        scalar = chaos_product(data, (q[row, 0], p[row, 0]),
                               (q[row, 1], p[row, 1]))
        assert batch[row] == pytest.approx(scalar, rel=1e-12, abs=1e-15)


# -------------------------------------------------------------- norm guards

def test_norm_guard_ok_below_radius():
    tiny = AnalyticSeparable(BoxProfile([0.0], [1.0], density=1e-5),
                             maxwellian(1.0, 1))
    assert check_norm_guard(tiny, "bbgky") == "ok"
    assert check_norm_guard(tiny, "collision") == "ok"


def test_norm_guard_warns_by_default():
    F = unit_box_maxwellian()   # norm 1 > e^-1
    msg = check_norm_guard(F, "bbgky")
    assert msg.startswith("warn")


def test_norm_guard_strict_raises():
    F = unit_box_maxwellian()
    with pytest.raises(NormGuardError):
        check_norm_guard(F, "bbgky", strict=True)


def test_norm_guard_uses_convergence_constants():
    from enskog.bounds import convergence_constants
    consts = convergence_constants()
    eps = 1e-6
    below = AnalyticSeparable(
        BoxProfile([0.0], [1.0], density=consts.bbgky_radius - eps),
        maxwellian(1.0, 1))
    above = AnalyticSeparable(
        BoxProfile([0.0], [1.0], density=consts.bbgky_radius + eps),
        maxwellian(1.0, 1))
    assert check_norm_guard(below, "bbgky") == "ok"
    assert check_norm_guard(above, "bbgky").startswith("warn")
    f2 = AnalyticSeparable(
        BoxProfile([0.0], [1.0], density=consts.functional_radius(2) - eps),
        maxwellian(1.0, 1))
    assert check_norm_guard(f2, "functional", s=2) == "ok"


def test_positivity_enforced_by_constructors():
    with pytest.raises(ValueError):
        BoxProfile([0.0], [1.0], density=-1.0)
    with pytest.raises(ValueError):
        Grid1D(0, 1, 0, 1, -np.ones((3, 3)))
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((3, 1)), np.zeros((3, 1)),
                         np.array([0.1, -0.1, 0.2]), 0.1)
