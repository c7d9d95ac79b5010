"""Combinatorial lemmas and convergence constants."""

import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enskog.bounds import (
    convergence_constants,
    functional_norm_majorant,
    nested_sum_count,
    rising_sum_identity,
)


def test_rising_sum_small_cases():
    assert rising_sum_identity(3, 0) == 0      # 1+2+3 = 3*4/2
    assert rising_sum_identity(3, 1) == 0      # 2+6+12 = 3*4*5/3
    assert rising_sum_identity(20, 5) == 0


def test_rising_sum_full_range():
    for n in range(0, 31):
        for m in range(0, 31):
            assert rising_sum_identity(n, m) == 0


def test_nested_sum_small_cases():
    assert nested_sum_count(5, 2) == 0         # single sum: m_j + 1
    assert nested_sum_count(3, 3) == 0         # 1+2+3+4 = 10 = 4*5/2
    assert nested_sum_count(10, 5) == 0


def test_nested_sum_full_range():
    for m_j in range(1, 21):
        for s in range(2, 21):
            assert nested_sum_count(m_j, s) == 0


def test_nested_sum_matches_brute_force_enumeration():
    # independent oracle: explicit nested loops for small sizes
    import itertools

    def brute(m_j, s):
        count = 0
        for ks in itertools.product(range(m_j + 1), repeat=s - 1):
            if all(a >= b for a, b in zip(ks, ks[1:])):
                count += 1
        closed = 1
        for j in range(1, s):
            closed *= m_j + j
        return count - closed // math.factorial(s - 1)

    for m_j in range(1, 6):
        for s in range(2, 6):
            assert nested_sum_count(m_j, s) == brute(m_j, s)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30))
def test_rising_sum_property(n, m):
    assert rising_sum_identity(n, m) == 0


def test_range_checks():
    with pytest.raises(ValueError):
        rising_sum_identity(31, 0)
    with pytest.raises(ValueError):
        nested_sum_count(0, 2)
    with pytest.raises(ValueError):
        nested_sum_count(1, 1)


# ------------------------------------------------------------- constants

def test_constant_values_against_mpmath():
    mpmath.mp.dps = 40
    consts = convergence_constants()
    ref = {
        "bbgky": mpmath.e ** -1,
        "collision": mpmath.e ** -10 / (1 + mpmath.e ** -9),
        "functional2": mpmath.e ** -8,
        "equiv2": mpmath.e ** -10 / (1 + mpmath.e ** -9),
    }
    assert abs(consts.bbgky_radius - float(ref["bbgky"])) \
        <= 1e-12 * float(ref["bbgky"])
    assert abs(consts.enskog_collision - float(ref["collision"])) \
        <= 1e-12 * float(ref["collision"])
    assert abs(consts.functional_radius(2) - float(ref["functional2"])) \
        <= 1e-12 * float(ref["functional2"])
    assert abs(consts.equivalence_radius(2) - float(ref["equiv2"])) \
        <= 1e-12 * float(ref["equiv2"])


def test_constant_magnitudes():
    consts = convergence_constants()
    assert consts.bbgky_radius == pytest.approx(0.3678794, abs=1e-7)
    assert consts.enskog_collision == pytest.approx(4.5394e-5, rel=1e-4)
    assert consts.functional_radius(2) == pytest.approx(3.3546e-4, rel=1e-4)


# ------------------------------------------------------------- majorant

def test_majorant_zero_norm():
    rep = functional_norm_majorant(2, 0.0)
    assert rep.satisfied and rep.details["majorant"] == 0.0


def test_majorant_inside_radius_is_finite():
    rep = functional_norm_majorant(2, math.exp(-9.0))   # e^-9 < e^-8
    assert rep.satisfied
    assert rep.details["majorant"] > 0.0
    assert not rep.details["divergent"]


def test_majorant_outside_radius_flags_divergence():
    rep = functional_norm_majorant(2, math.exp(-7.0))   # e^-7 > e^-8
    assert not rep.satisfied
    assert rep.details["divergent"]


def test_majorant_monotone_in_norm_and_s():
    values = [functional_norm_majorant(2, x).details["majorant"]
              for x in (1e-6, 2e-6, 5e-6)]
    assert values[0] < values[1] < values[2]
    small = functional_norm_majorant(2, 1e-8).details["majorant"]
    # larger s shrinks ||F||^s faster than the exponentials grow at tiny norm
    consts = convergence_constants()
    assert consts.functional_radius(3) < consts.functional_radius(2)
    rep3 = functional_norm_majorant(3, 1e-8)
    assert rep3.satisfied
