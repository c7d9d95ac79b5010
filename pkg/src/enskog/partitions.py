"""Set-partition combinatorics and cumulants of hard-sphere flow groups.

A cumulant of order 1+n acts on a cluster set: the labels of one cluster
Y (treated as a single element) plus n free labels.  Each partition of
that (1+n)-element set contributes a signed, weighted product of flows in
which every declusterized block evolves as an isolated subsystem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .flow import SystemState, evolve, is_allowed

# Bell(12) = 4_213_597 terms; beyond that enumeration is off desk scale.
MAX_PARTITION_ELEMENTS = 12

PhaseFunction = Callable[[SystemState], float]


@dataclass(frozen=True)
class ClusterSet:
    """One aggregated cluster Y plus free labels (0-based particle indices)."""

    cluster: tuple[int, ...]
    free: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cluster", tuple(int(i) for i in self.cluster))
        object.__setattr__(self, "free", tuple(int(i) for i in self.free))
        if not self.cluster:
            raise ValueError("cluster must be nonempty")
        labels = self.cluster + self.free
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be distinct")

    @property
    def labels(self) -> tuple[int, ...]:
        return self.cluster + self.free

    @property
    def order(self) -> int:
        """Number of elements of the partitioned set: 1 + |free|."""
        return 1 + len(self.free)


@dataclass(frozen=True)
class Partition:
    """Partition of symbols 0..m-1; block order follows first appearance."""

    blocks: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.blocks)

    def block_containing(self, symbol: int) -> int:
        for b, block in enumerate(self.blocks):
            if symbol in block:
                return b
        raise KeyError(symbol)


@dataclass(frozen=True)
class CumulantTerm:
    """One partition's contribution: weight and declusterized blocks."""

    sign_weight: int
    blocks: tuple[tuple[int, ...], ...]


def _restricted_growth_strings(m: int) -> Iterator[tuple[int, ...]]:
    """All RGS of length m in lexicographic order (a[0]=0, a[i]<=max+1)."""
    a = [0] * m
    while True:
        yield tuple(a)
        # find rightmost position that can be incremented
        i = m - 1
        while i > 0:
            if a[i] <= max(a[:i]):
                break
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for j in range(i + 1, m):
            a[j] = 0


def iter_partitions(m: int) -> Iterator[Partition]:
    """Yield all set partitions of m labeled elements, RGS-lexicographic."""
    if not 1 <= m <= MAX_PARTITION_ELEMENTS:
        raise ValueError(
            f"partition enumeration supports 1 <= m <= {MAX_PARTITION_ELEMENTS}")
    for rgs in _restricted_growth_strings(m):
        nblocks = max(rgs) + 1
        blocks = [[] for _ in range(nblocks)]
        for symbol, b in enumerate(rgs):
            blocks[b].append(symbol)
        yield Partition(tuple(tuple(b) for b in blocks))


def enumerate_partitions(m: int) -> list[Partition]:
    """All set partitions of m labeled elements; count equals Bell(m)."""
    return list(iter_partitions(m))


def partition_weight(nblocks: int) -> int:
    """The cumulant weight (-1)^(|P|-1) (|P|-1)!."""
    return (-1) ** (nblocks - 1) * math.factorial(nblocks - 1)


def partition_alternating_sum(m: int) -> int:
    """Sum of (-1)^(|P|-1)(|P|-1)! over all partitions: 1 for m=1, else 0."""
    return sum(partition_weight(p.size) for p in iter_partitions(m))


def cumulant_terms(cs: ClusterSet) -> list[CumulantTerm]:
    """Signed, weighted, declusterized blocks of the (1+n)th-order cumulant.

    Symbol 0 stands for the aggregated cluster {Y}; symbols 1..n for the
    free labels.  Declusterization expands symbol 0 to the cluster's
    member labels inside its block.
    """
    n = len(cs.free)
    terms = []
    for part in iter_partitions(1 + n):
        blocks = []
        for block in part.blocks:
            labels: list[int] = []
            for symbol in block:
                if symbol == 0:
                    labels.extend(cs.cluster)
                else:
                    labels.append(cs.free[symbol - 1])
            blocks.append(tuple(labels))
        terms.append(CumulantTerm(partition_weight(part.size), tuple(blocks)))
    return terms


def _blockwise_backward(x: SystemState, blocks, t: float,
                        collisionless: bool):
    """Evolve each block backward by t as an isolated subsystem.

    Returns the assembled state, or None when some block's internal
    configuration is forbidden (the block flow's zero branch).  Particles
    in different blocks may interpenetrate; only within-block overlap
    matters here.
    """
    if collisionless:
        q = x.q.copy()
        idx = [i for block in blocks for i in block]
        q[idx] = q[idx] - t * x.p[idx]
        return x.with_arrays(q=q)
    out = x
    for block in blocks:
        sub = x.subset(block)
        if not sub.allowed():
            return None
        out = out.replace(block, evolve(sub, -t))
    return out


def apply_cumulant(t: float, cs: ClusterSet, f: PhaseFunction,
                   x: SystemState, collisionless: bool = False) -> float:
    """Apply the (1+n)th-order cumulant of backward flows to f at x.

    Every partition of ({Y}, free) contributes sign_weight times f at the
    point whose blocks were evolved backward in time t independently.
    Labels not in the cluster set pass through untouched.
    """
    values = []
    for term in cumulant_terms(cs):
        y = _blockwise_backward(x, term.blocks, t, collisionless)
        if y is None:
            continue
        values.append(term.sign_weight * float(f(y)))
    return math.fsum(values)


def apply_scattering_cumulant(t: float, cs: ClusterSet, f: PhaseFunction,
                              x: SystemState,
                              collisionless: bool = False) -> float:
    """Backward cumulant, allowed-configuration mask, forward free flows.

    Realizes the scattering cumulant as apply_cumulant applied to
    h(y) = [labels of y allowed] * f(y with each label freely advanced
    by t individually).
    """
    if t < 0:
        raise ValueError("scattering cumulants are defined for t >= 0")
    labels = list(cs.labels)

    def h(y: SystemState) -> float:
        if not is_allowed(y.q[labels], y.sigma):
            return 0.0
        q = y.q.copy()
        q[labels] = q[labels] + t * y.p[labels]
        return float(f(y.with_arrays(q=q)))

    return apply_cumulant(t, cs, h, x, collisionless=collisionless)


def bell_numbers_triangle(m_max: int) -> list[int]:
    """Bell numbers B_1..B_m_max via the Bell triangle recurrence."""
    row = [1]
    out = [1]
    for _ in range(m_max - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
        out.append(row[-1])
    return out


def partition_report(m_max: int) -> list[dict]:
    """Per-m report {m, bell, alternating_sum} for the verify CLI hook."""
    rows = []
    for m in range(1, m_max + 1):
        rows.append({
            "m": m,
            "bell": sum(1 for _ in iter_partitions(m)),
            "alternating_sum": partition_alternating_sum(m),
        })
    return rows
