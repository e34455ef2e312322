"""Greedy seed selection on a fixed live-edge sample.

The weighted greedy serves three roles: the oracle of the multiplicative
weights solvers, the influence-maximization baseline (all-ones weights), and
a reference for the fairness heuristics below.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .diffusion import LiveEdgeSample
from .errors import ParameterError
from .graph_core import CommunityStructure

__all__ = [
    "GreedyTrace",
    "weights_from_community_duals",
    "greedy_weighted_im",
    "greedy_maximin",
    "myopic_fish",
]


@dataclass(frozen=True, eq=False)
class GreedyTrace:
    """Nested greedy prefixes ``S_1 ⊆ ... ⊆ S_k`` with their objective values."""

    order: tuple
    values: np.ndarray
    gains: np.ndarray

    @property
    def k(self):
        return len(self.order)

    @property
    def sets(self):
        return [frozenset(self.order[:i]) for i in range(1, len(self.order) + 1)]

    @property
    def final(self):
        return frozenset(self.order)

    def to_dict(self):
        return {"order": list(self.order), "values": self.values.tolist(), "gains": self.gains.tolist()}


def weights_from_community_duals(z, communities: CommunityStructure) -> np.ndarray:
    """Node weights ``omega_v = sum over communities C containing v of z_C / |C|``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (communities.m,):
        raise ParameterError(f"expected {communities.m} community weights, got shape {z.shape}")
    if np.any(z < 0):
        raise ParameterError("community weights must be non-negative")
    return communities.membership.T @ (z / communities.sizes)


def _check_k(k, n):
    if not 1 <= int(k) <= n:
        raise ParameterError(f"budget k={k} must lie in 1..{n}")
    return int(k)


def _gain(sample, u, covered, omega):
    # unnormalized gain: sum of omega_v over (t, v) reached from u and not yet covered
    lo, hi = sample.ptr[u], sample.ptr[u + 1]
    fresh = ~covered[sample.cell[lo:hi]]
    c = np.bincount(sample.dst[lo:hi][fresh], minlength=sample.n)
    return float((c * omega).sum())


def _cover(sample, u, covered):
    lo, hi = sample.ptr[u], sample.ptr[u + 1]
    covered[sample.cell[lo:hi]] = True


def greedy_weighted_im(sample: LiveEdgeSample, omega, k, lazy=True) -> GreedyTrace:
    """Greedy maximization of ``sum_v omega_v * sigma_v(S)`` over ``|S| <= k``.

    Ties go to the lowest node id.  The lazy (priority-queue) and naive
    variants return identical traces.
    """
    n = sample.n
    k = _check_k(k, n)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (n,) or np.any(omega < 0):
        raise ParameterError("omega must be a non-negative vector of length n")
    covered = np.zeros(sample.T * n, dtype=bool)
    order, gains = [], []
    if lazy:
        # round-0 gains from the count matrix equal _gain on an empty cover
        initial = [float((sample.counts[u] * omega).sum()) for u in range(n)]
        heap = [(-g, u) for u, g in enumerate(initial)]
        heapq.heapify(heap)
        fresh_at = [0] * n
        for r in range(k):
            while True:
                neg, u = heap[0]
                if fresh_at[u] == r:
                    heapq.heappop(heap)
                    break
                fresh_at[u] = r
                heapq.heapreplace(heap, (-_gain(sample, u, covered, omega), u))
            order.append(u)
            gains.append(-neg)
            _cover(sample, u, covered)
    else:
        chosen = np.zeros(n, dtype=bool)
        for _ in range(k):
            best_u, best_g = -1, -1.0
            for u in range(n):
                if chosen[u]:
                    continue
                g = _gain(sample, u, covered, omega)
                if g > best_g:
                    best_u, best_g = u, g
            chosen[best_u] = True
            order.append(best_u)
            gains.append(best_g)
            _cover(sample, best_u, covered)
    gains = np.asarray(gains) / sample.T
    return GreedyTrace(tuple(order), np.cumsum(gains), gains)


def greedy_maximin(sample: LiveEdgeSample, communities: CommunityStructure, k, degree=None) -> frozenset:
    """Add ``k`` seeds one at a time, each maximizing the minimum community value.

    Ties go to the larger ``degree`` (out-degree by default), then the lower id.
    """
    n, T = sample.n, sample.T
    k = _check_k(k, n)
    degree = sample.graph.out_degree if degree is None else np.asarray(degree)
    memb = communities.membership
    denom = communities.sizes * float(T)
    reached = np.zeros(n, dtype=np.int64)
    covered = np.zeros(T * n, dtype=bool)
    chosen = []
    for _ in range(k):
        best, best_key = None, None
        for u in range(n):
            if u in chosen:
                continue
            lo, hi = sample.ptr[u], sample.ptr[u + 1]
            fresh = ~covered[sample.cell[lo:hi]]
            add = np.bincount(sample.dst[lo:hi][fresh], minlength=n)
            # integer numerators keep equal fractions bit-identical
            value = float(np.min((memb @ (reached + add)) / denom))
            key = (value, int(degree[u]), -u)
            if best_key is None or key > best_key:
                best, best_key = u, key
        lo, hi = sample.ptr[best], sample.ptr[best + 1]
        fresh = ~covered[sample.cell[lo:hi]]
        reached += np.bincount(sample.dst[lo:hi][fresh], minlength=n)
        covered[sample.cell[lo:hi][fresh]] = True
        chosen.append(best)
    return frozenset(chosen)


def myopic_fish(sample: LiveEdgeSample, communities: CommunityStructure, k) -> frozenset:
    """Seed the max out-degree node, then repeatedly the least-reached node.

    Each step looks at the community with the lowest current value (lowest
    index on ties) and adds its least-reached unseeded member.  With singleton
    communities this is simply the least-reached node overall.
    """
    n = sample.n
    k = _check_k(k, n)
    degree = sample.graph.out_degree
    first = int(np.flatnonzero(degree == degree.max())[0])
    chosen = [first]
    covered = np.zeros(sample.T * n, dtype=bool)
    _cover(sample, first, covered)
    memb = communities.membership
    big = np.iinfo(np.int64).max
    for _ in range(k - 1):
        reached = covered.reshape(sample.T, n).sum(axis=0).astype(np.int64)
        value = (memb @ reached) / communities.sizes
        reached[chosen] = big
        u = None
        for c in np.argsort(value, kind="stable"):
            members = np.asarray(communities[c])
            free = members[reached[members] < big]
            if free.size:
                u = int(free[np.argmin(reached[free])])
                break
        if u is None:
            u = int(np.argmin(reached))
        chosen.append(u)
        _cover(sample, u, covered)
    return frozenset(chosen)
