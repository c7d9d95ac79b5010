"""Vectorized 1D evaluators for cumulants and evolution operators.

These mirror the scalar operator machinery on batches of 1D states
(arrays of shape (m, k), one rod system per row) using the exact hard-rod
free-gas map instead of the event-driven loop.  The scalar path remains
the reference; the tests pin both paths together on random batches.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .flow import ALLOWED_RTOL, rod_gas_evolve
from .partitions import ClusterSet, cumulant_terms
from .operators import nested_index_terms

Array = np.ndarray
BatchFunction = Callable[[Array, Array], Array]   # (q, p) (m,k) -> (m,)


def min_pair_gap(q: Array) -> Array:
    """Minimum pairwise |q_i - q_j| over the last axis; +inf for singletons."""
    k = q.shape[-1]
    if k < 2:
        return np.full(q.shape[:-1], np.inf)
    qs = np.sort(q, axis=-1)
    return np.min(np.diff(qs, axis=-1), axis=-1)


def allowed_rows(q: Array, sigma: float) -> Array:
    return min_pair_gap(q) >= sigma * (1.0 - ALLOWED_RTOL)


def cumulant_batch(t: float, cluster: Sequence[int], free: Sequence[int],
                   fvec: BatchFunction, q: Array, p: Array, sigma: float,
                   collisionless: bool = False) -> Array:
    """Row-wise cumulant of backward flows applied to a batch function.

    Column indices in `cluster` + `free` are the operator's labels; other
    columns are spectators.  Rows where a block's internal configuration
    is forbidden contribute zero for that partition term.
    """
    cs = ClusterSet(cluster=tuple(cluster), free=tuple(free))
    total = np.zeros(q.shape[0])
    for term in cumulant_terms(cs):
        qy = q.copy()
        py = p.copy()
        valid = np.ones(q.shape[0], dtype=bool)
        for block in term.blocks:
            idx = list(block)
            if collisionless:
                qy[:, idx] -= t * p[:, idx]
                continue
            if len(idx) > 1:
                valid &= allowed_rows(q[:, idx], sigma)
            qb, pb = rod_gas_evolve(q[:, idx], p[:, idx], -t, sigma)
            qy[:, idx] = qb
            py[:, idx] = pb
        vals = fvec(qy, py)
        total += term.sign_weight * np.where(valid, vals, 0.0)
    return total


def scattering_cumulant_operator_batch(t: float, cluster: Sequence[int],
                                       free: Sequence[int], sigma: float,
                                       collisionless: bool = False):
    """Batch operator form of the scattering cumulant on given labels."""
    labels = list(cluster) + list(free)

    def wrap(fvec: BatchFunction) -> BatchFunction:
        def h(qy: Array, py: Array) -> Array:
            qa = qy.copy()
            qa[:, labels] = qa[:, labels] + t * py[:, labels]
            vals = fvec(qa, py)
            if len(labels) > 1:
                vals = np.where(allowed_rows(qy[:, labels], sigma), vals, 0.0)
            return vals

        def g(q: Array, p: Array) -> Array:
            return cumulant_batch(t, cluster, free, h, q, p, sigma,
                                  collisionless)
        return g

    return wrap


def v_operator_batch(t: float, s: int, n: int, sigma: float,
                     collisionless: bool = False,
                     renormalized: bool = False):
    """Batch evaluator of the (1+n)th-order evolution operator.

    Shares the materialized term list with the scalar path; only the flow
    kernel differs.
    """
    terms = nested_index_terms(s, n, renormalized=renormalized)

    def wrap(fvec: BatchFunction) -> BatchFunction:
        def g(q: Array, p: Array) -> Array:
            total = np.zeros(q.shape[0])
            for term in terms:
                gv = fvec
                for ops in term.factors:
                    for op in ops:
                        gv = scattering_cumulant_operator_batch(
                            t, op.cluster, op.free, sigma, collisionless)(gv)
                gv = scattering_cumulant_operator_batch(
                    t, term.outer.cluster, term.outer.free, sigma,
                    collisionless)(gv)
                total += term.sign * float(term.coefficient) * gv(q, p)
            return total
        return g

    return wrap


def v1_batch(t: float, s: int, sigma: float,
             collisionless: bool = False):
    """First-order operator: backward flow, mask, forward free streaming."""
    return scattering_cumulant_operator_batch(
        t, tuple(range(s)), (), sigma, collisionless)
