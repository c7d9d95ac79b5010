"""Hard-sphere flow: collision law, event prediction, group properties."""

import numpy as np
import pytest

from enskog.flow import (
    CollisionEvent,
    ForbiddenInitialConfiguration,
    NonFiniteInput,
    PathologicalEvent,
    PhasePoint,
    SystemState,
    apply_flow_to_function,
    collision_map,
    evolve,
    is_allowed,
    next_collision,
    pair_separations,
    random_allowed_state,
    rod_gas_evolve,
)


def state_1d(qs, ps, sigma):
    q = np.asarray(qs, dtype=float)[:, None]
    p = np.asarray(ps, dtype=float)[:, None]
    return SystemState(q, p, sigma)


# ---------------------------------------------------------------- is_allowed

def test_is_allowed_separated_pair():
    assert is_allowed([[0, 0, 0], [2, 0, 0]], 1.0)


def test_is_allowed_overlap():
    assert not is_allowed([[0, 0, 0], [0.5, 0, 0]], 1.0)


def test_is_allowed_triple_brute_force():
    # pair (1,3) violates; cross-check against explicit pair distances
    q = np.array([[0, 0, 0], [1, 0, 0], [0.3, 0, 0]], dtype=float)
    assert pair_separations(q).min() < 1.0
    assert not is_allowed(q, 1.0)


def test_is_allowed_contact_counts_as_allowed():
    assert is_allowed([[0.0], [1.0]], 1.0)


def test_is_allowed_rejects_nan():
    with pytest.raises(NonFiniteInput):
        is_allowed([[0, 0, np.nan], [1, 0, 0]], 1.0)


# ------------------------------------------------------------- collision_map

def test_collision_map_head_on_exchange():
    pi, pj = collision_map([1, 0, 0], [-1, 0, 0], [1, 0, 0])
    assert np.allclose(pi, [-1, 0, 0]) and np.allclose(pj, [1, 0, 0])


def test_collision_map_tangential_unchanged():
    pi, pj = collision_map([0, 1, 0], [0, 0, 0], [1, 0, 0])
    assert np.allclose(pi, [0, 1, 0]) and np.allclose(pj, [0, 0, 0])


def test_collision_map_oblique_hand_value():
    # substitute into the exchange law by hand
    pi, pj = collision_map([1, 1, 0], [0, 0, 0], [1, 0, 0])
    assert np.allclose(pi, [0, 1, 0]) and np.allclose(pj, [1, 0, 0])


def test_collision_map_conservation_and_involution():
    rng = np.random.default_rng(1)
    m = 20_000
    pi = rng.normal(size=(m, 3))
    pj = rng.normal(size=(m, 3))
    eta = rng.normal(size=(m, 3))
    eta /= np.linalg.norm(eta, axis=1, keepdims=True)
    pi_s, pj_s = collision_map(pi, pj, eta)
    assert np.max(np.abs(pi_s + pj_s - pi - pj)) <= 1e-12
    e0 = np.sum(pi * pi, axis=1) + np.sum(pj * pj, axis=1)
    e1 = np.sum(pi_s * pi_s, axis=1) + np.sum(pj_s * pj_s, axis=1)
    assert np.max(np.abs(e1 - e0)) <= 1e-12 * np.max(e0)
    pi_2, pj_2 = collision_map(pi_s, pj_s, eta)
    assert np.max(np.abs(pi_2 - pi)) <= 1e-12
    assert np.max(np.abs(pj_2 - pj)) <= 1e-12


def test_collision_map_requires_unit_eta():
    with pytest.raises(ValueError):
        collision_map([1, 0, 0], [0, 0, 0], [2, 0, 0])


# ------------------------------------------------------------ next_collision

def test_next_collision_1d_rods():
    st = state_1d([0.0, 1.0], [1.0, -1.0], 0.25)
    ev = next_collision(st)
    assert ev.pair == (0, 1)
    assert ev.time == pytest.approx(0.375, abs=1e-14)


def test_next_collision_3d_quadratic_root():
    st = SystemState([[0, 0, 0], [3, 0, 0]], [[1, 0, 0], [0, 0, 0]], 1.0)
    ev = next_collision(st)
    assert ev.time == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(ev.eta, [-1, 0, 0], atol=1e-12)
    # eta points from i to j's side: approaching means <eta, pi - pj> < 0
    assert ev.eta @ (st.p[0] - st.p[1]) < 0


def test_next_collision_receding_none():
    st = state_1d([0.0, 2.0], [-1.0, 1.0], 0.5)
    assert next_collision(st) is None


def test_next_collision_from_contact_is_immediate():
    st = state_1d([0.0, 0.25], [1.0, -1.0], 0.25)
    ev = next_collision(st)
    assert ev.time == 0.0


def test_next_collision_tie_is_pathological():
    # mirror-symmetric triple: two pair contacts at the same instant
    st = state_1d([-1.0, 0.0, 1.0], [1.0, 0.0, -1.0], 0.25)
    with pytest.raises(PathologicalEvent) as err:
        next_collision(st)
    assert len(err.value.times) == 2


def test_next_collision_grazing_skipped():
    # impact parameter exactly sigma: tangent encounter, measure zero
    st = SystemState([[0, 0, 0], [5, 1, 0]], [[1, 0, 0], [0, 0, 0]], 1.0)
    assert next_collision(st) is None


# ------------------------------------------------------------------- evolve

def test_evolve_free_particle():
    st = state_1d([0.0], [1.0], 0.1)
    out = evolve(st, 2.0)
    assert out.q[0, 0] == pytest.approx(2.0)
    assert out.p[0, 0] == pytest.approx(1.0)


def test_evolve_1d_hand_trace():
    # contact at 0.375, momenta exchange, then free streaming
    st = state_1d([0.0, 1.0], [1.0, -1.0], 0.25)
    out = evolve(st, 1.0)
    assert np.allclose(out.q[:, 0], [-0.25, 1.25], atol=1e-12)
    assert np.allclose(out.p[:, 0], [-1.0, 1.0], atol=1e-14)


def test_evolve_reversibility_random_5_spheres():
    rng = np.random.default_rng(7)
    for _ in range(20):
        st = random_allowed_state(rng, n=5, dim=3, sigma=1.0, box=6.0)
        t = 3.0
        back = evolve(evolve(st, t), -t)
        scale = max(1.0, np.max(np.abs(st.q)))
        assert np.max(np.abs(back.q - st.q)) <= 1e-9 * scale
        assert np.max(np.abs(back.p - st.p)) <= 1e-9


def test_evolve_group_property():
    rng = np.random.default_rng(11)
    for _ in range(10):
        st = random_allowed_state(rng, n=4, dim=3, sigma=1.0, box=5.0)
        s, t = 1.3, 2.1
        a = evolve(evolve(st, s), t)
        b = evolve(st, s + t)
        scale = max(1.0, np.max(np.abs(b.q)))
        assert np.max(np.abs(a.q - b.q)) <= 1e-9 * scale
        assert np.max(np.abs(a.p - b.p)) <= 1e-9


def test_evolve_energy_conserved_and_allowed():
    rng = np.random.default_rng(3)
    st = random_allowed_state(rng, n=8, dim=3, sigma=1.0, box=5.0)
    e0 = np.sum(st.p ** 2)
    events = []
    out = evolve(st, 10.0, events=events)
    assert abs(np.sum(out.p ** 2) - e0) <= 1e-10 * e0
    assert out.allowed()
    assert len(events) >= 1


def test_evolve_forbidden_initial_raises():
    st = state_1d([0.0, 0.1], [0.0, 0.0], 0.25)
    with pytest.raises(ForbiddenInitialConfiguration):
        evolve(st, 1.0)
    with pytest.raises(ForbiddenInitialConfiguration):
        next_collision(st)


def test_evolve_collisionless_is_free_streaming():
    st = state_1d([0.0, 1.0], [1.0, -1.0], 0.25)
    out = evolve(st, 1.0, collisionless=True)
    assert np.allclose(out.q[:, 0], [1.0, 0.0])
    assert np.allclose(out.p[:, 0], [1.0, -1.0])


def test_evolve_nonfinite_time():
    st = state_1d([0.0], [1.0], 0.1)
    with pytest.raises(NonFiniteInput):
        evolve(st, np.inf)


# ------------------------------------------------------- 1D hard-rod oracle

def test_rod_oracle_sorted_positions_match_free_gas():
    # evolved rod positions = sorted free-point positions + rank offsets
    rng = np.random.default_rng(5)
    n, sigma, t = 10, 0.1, 1.7
    q = np.sort(rng.uniform(0, 20, size=n))
    while np.min(np.diff(q)) <= sigma:
        q = np.sort(rng.uniform(0, 20, size=n))
    p = rng.normal(size=n)
    st = state_1d(q, p, sigma)
    out = evolve(st, t)
    free_points = np.sort(q - sigma * np.arange(n) + t * p)
    predicted = free_points + sigma * np.arange(n)
    assert np.max(np.abs(np.sort(out.q[:, 0]) - predicted)) <= 1e-9
    # gap sequence therefore matches the free-streaming prediction
    gaps = np.diff(np.sort(out.q[:, 0]))
    assert np.max(np.abs(gaps - (np.diff(free_points) + sigma))) <= 1e-9


def test_rod_gas_evolve_matches_event_driven_with_labels():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = rng.integers(2, 6)
        q = np.sort(rng.uniform(0, 5, size=n))
        if n > 1 and np.min(np.diff(q)) <= 0.2:
            continue
        p = rng.normal(size=n)
        t = rng.uniform(-2, 2)
        st = state_1d(q, p, 0.2)
        ref = evolve(st, t)
        qb, pb = rod_gas_evolve(q, p, t, 0.2)
        assert np.max(np.abs(qb - ref.q[:, 0])) <= 1e-9
        assert np.max(np.abs(pb - ref.p[:, 0])) <= 1e-12


def test_rod_gas_evolve_batched():
    rng = np.random.default_rng(23)
    q = np.sort(rng.uniform(0, 10, size=(50, 4)), axis=1)
    keep = np.min(np.diff(q, axis=1), axis=1) > 0.3
    q = q[keep]
    p = rng.normal(size=q.shape)
    qb, pb = rod_gas_evolve(q, p, 0.9, 0.3)
    for row in range(q.shape[0]):
        ref = evolve(state_1d(q[row], p[row], 0.3), 0.9)
        assert np.max(np.abs(qb[row] - ref.q[:, 0])) <= 1e-9
        assert np.max(np.abs(pb[row] - ref.p[:, 0])) <= 1e-12


# ---------------------------------------------------- flow applied to functions

def test_apply_flow_constant_function():
    st = state_1d([0.0, 1.0], [1.0, -1.0], 0.25)
    assert apply_flow_to_function(lambda s: 1.0, 2.0, st) == 1.0


def test_apply_flow_forbidden_gives_zero():
    st = state_1d([0.0, 0.1], [1.0, -1.0], 0.25)
    assert apply_flow_to_function(lambda s: 1.0, 2.0, st) == 0.0


def test_apply_flow_single_particle_position():
    st = state_1d([3.0], [2.0], 0.1)
    val = apply_flow_to_function(lambda s: float(s.q[0, 0]), 1.0, st)
    assert val == pytest.approx(1.0)


# ------------------------------------------------------------- serialization

def test_json_round_trip():
    st = SystemState([[0, 0, 0], [2, 0, 0]], [[1, 2, 3], [0, 0, 0]], 1.0)
    again = SystemState.from_json(st.to_json())
    assert np.array_equal(again.q, st.q)
    assert np.array_equal(again.p, st.p)
    assert again.sigma == st.sigma


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint([0.0, 1.0], [1.0])
    with pytest.raises(NonFiniteInput):
        PhasePoint([np.nan], [1.0])
    assert PhasePoint([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]).dim == 3
