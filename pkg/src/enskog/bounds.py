"""Exact combinatorial lemmas and convergence majorants.

Identities are checked in arbitrary-precision integer arithmetic; floating
point enters only through the transcendental constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict
    paper_bound: float
    computed: float
    satisfied: bool
    details: dict = field(default_factory=dict)


def rising_sum_identity(n: int, m: int) -> int:
    """Residual of sum_{k<=n} k(k+1)...(k+m) = n(n+1)...(n+m+1)/(m+2).

    Exact integers; must be 0.  m = 0 is the arithmetic progression.
    """
    if not (0 <= n <= 30 and 0 <= m <= 30):
        raise ValueError("supported range is n, m <= 30")
    lhs = 0
    for k in range(1, n + 1):
        prod = 1
        for j in range(m + 1):
            prod *= k + j
        lhs += prod
    rhs_num = 1
    for j in range(m + 2):
        rhs_num *= n + j
    if rhs_num % (m + 2):
        return lhs * (m + 2) - rhs_num   # keep exactness even if indivisible
    return lhs - rhs_num // (m + 2)


def nested_sum_count(m_j: int, s: int) -> int:
    """Residual of the nested monotone-index count against its closed form.

    The count sum_{k_2<=m_j} sum_{k_3<=k_2} ... sum_{k_s<=k_{s-1}} 1 is
    evaluated by sequential summation (exact integers) and compared with
    (m_j+1)(m_j+2)...(m_j+s-1)/(s-1)!; must be 0.
    """
    if not (1 <= m_j <= 20 and 2 <= s <= 20):
        raise ValueError("supported range is m_j <= 20, 2 <= s <= 20")
    # tally[v] = number of admissible tails starting at value v
    tally = [1] * (m_j + 1)
    for _ in range(s - 2):
        acc = 0
        cumulative = []
        for v in range(m_j + 1):
            acc += tally[v]
            cumulative.append(acc)
        tally = cumulative
    count = sum(tally)
    closed = 1
    for j in range(1, s):
        closed *= m_j + j
    closed //= math.factorial(s - 1)
    return count - closed


@dataclass(frozen=True)
class ConvergenceConstants:
    """Named convergence radii of the series machinery."""

    bbgky_radius: float          # one-particle series converges below this
    enskog_collision: float      # collision-integral series existence bound

    def functional_radius(self, s: int) -> float:
        """Radius for the s-particle marginal functional series."""
        return math.exp(-(3 * s + 2))

    def equivalence_radius(self, s: int) -> float:
        """Radius for the hierarchy/kinetic-equation equivalence statement."""
        return math.exp(-(3 * s + 4)) / (1.0 + math.exp(-(3 * s + 3)))

    def as_dict(self, s_values=(2, 3)) -> dict:
        out = {
            "bbgky_radius": self.bbgky_radius,
            "enskog_collision": self.enskog_collision,
        }
        for s in s_values:
            out[f"functional_radius_s{s}"] = self.functional_radius(s)
            out[f"equivalence_radius_s{s}"] = self.equivalence_radius(s)
        return out


def convergence_constants() -> ConvergenceConstants:
    """Single source of truth for the norm guards of the series drivers."""
    return ConvergenceConstants(
        bbgky_radius=math.exp(-1.0),
        enskog_collision=math.exp(-10.0) / (1.0 + math.exp(-9.0)),
    )


def functional_norm_majorant(s: int, norm_f1: float) -> BoundReport:
    """Geometric majorant of the s-particle functional series norm.

    Evaluates ||F1||^s [ e^2 / (1 - e||F1||) + e^(3s+2) x / (1 - x) ] with
    x = e^(3s+2) ||F1||, and flags divergence at or beyond the radius
    e^-(3s+2) where the dominating geometric series stops converging.
    """
    if norm_f1 < 0:
        raise ValueError("norm must be nonnegative")
    if s < 1:
        raise ValueError("cluster size must be >= 1")
    radius = convergence_constants().functional_radius(s)
    divergent = norm_f1 >= radius
    if norm_f1 == 0.0:
        value: Optional[float] = 0.0
    elif divergent:
        value = None
    else:
        x = math.exp(3 * s + 2) * norm_f1
        value = norm_f1 ** s * (math.exp(2.0) / (1.0 - math.e * norm_f1)
                                + math.exp(3 * s + 2) * x / (1.0 - x))
    return BoundReport(
        name="functional_norm_majorant",
        inputs={"s": s, "norm_f1": norm_f1},
        paper_bound=radius,
        computed=norm_f1,
        satisfied=not divergent,
        details={"majorant": value, "divergent": divergent},
    )
