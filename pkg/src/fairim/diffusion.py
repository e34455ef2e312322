"""Live-edge sampling under the Triggering model and reach-probability estimators.

A :class:`LiveEdgeSample` stores, for every sampled live-edge graph ``t``, the
full reachability relation "``i`` reaches ``v``" as a flat list of
``(i, t, v)`` entries grouped by source node.  Everything downstream (set
coverage, independent-seeding coverage, greedy gains) is a reduction over
those entries.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ModelError, ParameterError, ParseError, SizeError
from .graph_core import CommunityStructure, DirectedWeightedGraph

__all__ = [
    "DiffusionModel",
    "EstimatorParams",
    "LiveEdgeSample",
    "ExactDiffusion",
    "sample_live_edges",
    "required_samples",
    "sigma_set",
    "sigma_node_strategy",
    "sigma_set_strategy",
    "community_value",
    "exact_sigma_bruteforce",
    "derive_seed",
]

MODELS = ("independent-cascade", "linear-threshold")
_ALIASES = {"ic": "independent-cascade", "lt": "linear-threshold"}


def derive_seed(*keys) -> int:
    """Deterministic 63-bit seed from a tuple of non-negative integers."""
    words = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return (int(words[0]) << 31) ^ int(words[1])


@dataclass(frozen=True)
class DiffusionModel:
    kind: str = "independent-cascade"

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in MODELS:
            raise ParameterError(f"unknown diffusion model {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    @property
    def short(self):
        return "ic" if self.kind == "independent-cascade" else "lt"

    def validate(self, graph: DirectedWeightedGraph):
        if self.kind == "linear-threshold":
            excess = np.flatnonzero(graph.in_weight_sum > 1.0 + 1e-9)
            if excess.size:
                v = int(excess[0])
                raise ModelError(
                    f"linear threshold needs in-weights summing to at most 1; node {v} has "
                    f"{graph.in_weight_sum[v]:.6g}",
                    node=v,
                )


def _as_model(model):
    if model is None:
        return DiffusionModel()
    return model if isinstance(model, DiffusionModel) else DiffusionModel(model)


@dataclass(frozen=True)
class EstimatorParams:
    """Accuracy target for the sampled estimators, or an explicit sample count."""

    epsilon: float = 0.1
    delta: float = 0.1
    T: int | None = None
    multiplier: float = 1.0

    def samples(self, n):
        if self.T is not None:
            if self.T < 1:
                raise ParameterError("explicit T must be positive")
            return int(self.T)
        return required_samples(self, n)


def required_samples(params: EstimatorParams, n: int) -> int:
    """``ceil(mult * eps^-2 * (n + ln n + ln(1/delta)))`` live-edge graphs."""
    eps, dlt, mult = float(params.epsilon), float(params.delta), float(params.multiplier)
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1), got {eps}")
    if not 0.0 < dlt < 0.5:
        raise ParameterError(f"delta must lie in (0, 1/2), got {dlt}")
    if n is None or n < 1:
        raise ParameterError("n must be a positive integer")
    if mult <= 0:
        raise ParameterError("multiplier must be positive")
    return int(math.ceil(mult * (n + math.log(n) + math.log(1.0 / dlt)) / (eps * eps)))


# ---------------------------------------------------------------------------
# sampling


DENSE_CLOSURE_MAX_N = 32


def _reach_matrix(n, tails, heads, dense=None):
    """Boolean ``R`` with ``R[i, v]`` true iff ``v`` is reachable from ``i``."""
    if tails.size == 0:
        return np.eye(n, dtype=bool)
    if dense is None:
        dense = n <= DENSE_CLOSURE_MAX_N
    if dense:
        # repeated squaring: path lengths double each step
        R = np.eye(n, dtype=np.uint8)
        R[tails, heads] = 1
        for _ in range(max(1, int(np.ceil(np.log2(n))))):
            nxt = (R @ R > 0).astype(np.uint8)
            if np.array_equal(nxt, R):
                break
            R = nxt
        return R.astype(bool)
    g = sp.csr_matrix((np.ones(tails.size, dtype=np.int8), (tails, heads)), shape=(n, n))
    ncomp, label = connected_components(g, directed=True, connection="strong")
    reach = np.zeros((ncomp, n), dtype=bool)
    reach[label, np.arange(n)] = True
    cu, cv = label[tails], label[heads]
    cross = cu != cv
    if cross.any():
        pairs = np.unique(cu[cross] * ncomp + cv[cross])
        cu, cv = pairs // ncomp, pairs % ncomp
        ptr = np.zeros(ncomp + 1, dtype=np.int64)
        np.cumsum(np.bincount(cu, minlength=ncomp), out=ptr[1:])
        indeg = np.bincount(cv, minlength=ncomp)
        order = []
        stack = list(np.flatnonzero(indeg == 0))
        succ = cv.tolist()
        while stack:
            c = stack.pop()
            order.append(c)
            for d in succ[ptr[c]:ptr[c + 1]]:
                indeg[d] -= 1
                if indeg[d] == 0:
                    stack.append(d)
        for c in reversed(order):
            lo, hi = ptr[c], ptr[c + 1]
            if hi > lo:
                reach[c] |= reach[cv[lo:hi]].any(axis=0)
    return reach[label]


def _draw_live(graph, model, rng):
    if graph.num_arcs == 0:
        return np.zeros(0, dtype=np.int64)
    if model.kind == "independent-cascade":
        return np.flatnonzero(rng.random(graph.num_arcs) < graph.weight)
    # linear threshold: each node keeps at most one in-arc
    order = graph.in_arcs
    cum = np.cumsum(graph.weight[order])
    base = np.concatenate([[0.0], cum])[graph.in_ptr[:-1]]
    r = rng.random(graph.n)
    has_in = np.flatnonzero(graph.in_degree > 0)
    pos = np.searchsorted(cum, base[has_in] + r[has_in], side="right")
    ok = pos < graph.in_ptr[has_in + 1]
    return np.sort(order[pos[ok]])


class LiveEdgeSample:
    """``T`` live-edge graphs with a precomputed reachability index.

    Reachability entries are stored in three parallel arrays ``src``, ``smp``,
    ``dst`` sorted by ``(src, smp, dst)``; ``ptr[u]:ptr[u+1]`` addresses the
    entries with source ``u``.  ``counts[i, v]`` is the number of samples in
    which ``i`` reaches ``v``.
    """

    def __init__(self, graph, model, seed, live, threads=1):
        self.graph = graph
        self.model = _as_model(model)
        self.seed = int(seed)
        self.live = [np.asarray(a, dtype=np.int64) for a in live]
        self.n = graph.n
        self.T = len(self.live)
        if self.T < 1:
            raise ParameterError("a live-edge sample needs T >= 1")
        n = self.n

        def reach(t):
            arcs = self.live[t]
            return _reach_matrix(n, graph.src[arcs], graph.dst[arcs])

        srcs, smps, dsts = [], [], []
        counts = np.zeros((n, n), dtype=np.int32)
        def collect(mats):
            for t, R in enumerate(mats):
                i, v = np.nonzero(R)
                srcs.append(i.astype(np.int32))
                dsts.append(v.astype(np.int32))
                smps.append(np.full(i.size, t, dtype=np.int32))
                np.add(counts, R, out=counts)

        if int(threads) <= 1:
            collect(map(reach, range(self.T)))
        else:
            # pool.map yields in submission order, so the result is thread-count independent
            with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                collect(pool.map(reach, range(self.T)))
        src = np.concatenate(srcs)
        order = np.argsort(src, kind="stable")
        self.src = src[order]
        self.smp = np.concatenate(smps)[order]
        self.dst = np.concatenate(dsts)[order]
        self.ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=n), out=self.ptr[1:])
        self.counts = counts
        for a in (self.src, self.smp, self.dst, self.ptr, self.counts):
            a.setflags(write=False)

    def __repr__(self):
        return f"LiveEdgeSample(n={self.n}, T={self.T}, model={self.model.short}, seed={self.seed})"

    @cached_property
    def cell(self):
        """Flat ``t * n + v`` index of each entry."""
        c = self.smp.astype(np.int64) * self.n + self.dst
        c.setflags(write=False)
        return c

    @property
    def nnz(self):
        return int(self.src.size)

    def entries_of(self, u):
        lo, hi = self.ptr[u], self.ptr[u + 1]
        return self.smp[lo:hi], self.dst[lo:hi]

    def sources_reaching(self, t, v):
        """Sorted array of nodes ``i`` with a live path ``i -> v`` in sample ``t``."""
        hit = (self.smp == t) & (self.dst == v)
        return np.unique(self.src[hit])

    def reached_from(self, t, u):
        smp, dst = self.entries_of(u)
        return np.sort(dst[smp == t])

    def covered(self, S):
        """Boolean ``(T, n)`` array: is ``v`` reached from ``S`` in sample ``t``."""
        cov = np.zeros(self.T * self.n, dtype=bool)
        for u in S:
            lo, hi = self.ptr[u], self.ptr[u + 1]
            cov[self.cell[lo:hi]] = True
        return cov.reshape(self.T, self.n)

    def sigma_set(self, S):
        return self.covered(_node_list(S, self.n)).mean(axis=0)

    def sigma_node_strategy(self, x):
        x = _check_x(x, self.n)
        with np.errstate(divide="ignore"):
            logmiss = np.log1p(-x)
        s = np.bincount(self.cell, weights=logmiss[self.src], minlength=self.T * self.n)
        q = 1.0 - np.exp(s)
        return q.reshape(self.T, self.n).mean(axis=0)

    def sigma_set_strategy(self, p):
        out = np.zeros(self.n)
        for S, prob in _support(p):
            out += prob * self.sigma_set(S)
        return out

    def truncated_coverage(self, x):
        """Per-node mean over samples of ``min(1, sum of x over sources reaching v)``."""
        x = _check_x(x, self.n)
        s = np.bincount(self.cell, weights=x[self.src], minlength=self.T * self.n)
        return np.minimum(1.0, s).reshape(self.T, self.n).mean(axis=0)

    # fixtures -------------------------------------------------------------

    def to_dict(self):
        return {
            "n": self.n,
            "model": self.model.short,
            "T": self.T,
            "seed": self.seed,
            "live": [a.tolist() for a in self.live],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d, graph):
        if int(d["n"]) != graph.n or len(d["live"]) != int(d["T"]):
            raise ParseError("live-edge fixture does not match the graph")
        live = [np.asarray(a, dtype=np.int64) for a in d["live"]]
        for a in live:
            if a.size and (a.min() < 0 or a.max() >= graph.num_arcs):
                raise ParseError("live arc index out of range")
        return cls(graph, d["model"], d["seed"], live)


def _node_list(S, n):
    out = [int(u) for u in S]
    for u in out:
        if not 0 <= u < n:
            raise ParameterError(f"seed node {u} outside 0..{n - 1}")
    return out


def _check_x(x, n):
    x = np.asarray(getattr(x, "x", x), dtype=np.float64)
    if x.shape != (n,):
        raise ParameterError(f"strategy vector must have length {n}")
    return x


def _support(p):
    support = getattr(p, "support", p)
    return [(S, float(q)) for S, q in support]


def sample_live_edges(graph, model="ic", T=100, seed=0, threads=1) -> LiveEdgeSample:
    """Sample ``T`` live-edge graphs; sample ``t`` uses the RNG stream ``(seed, t)``."""
    model = _as_model(model)
    model.validate(graph)
    if int(T) < 1:
        raise ParameterError("T must be positive")
    live = [_draw_live(graph, model, np.random.default_rng([int(seed), t])) for t in range(int(T))]
    return LiveEdgeSample(graph, model, seed, live, threads=threads)


def sigma_set(sample, S):
    """Per-node reach frequency from seed set ``S``; ``.sum()`` gives the spread."""
    return sample.sigma_set(S)


def sigma_node_strategy(sample, x):
    return sample.sigma_node_strategy(x)


def sigma_set_strategy(sample, p):
    return sample.sigma_set_strategy(p)


def community_value(values, communities: CommunityStructure):
    values = np.asarray(values, dtype=np.float64)
    return (communities.membership @ values) / communities.sizes


# ---------------------------------------------------------------------------
# exact enumeration (test oracle)

MAX_RANDOM_ARCS = 25
MAX_STRATEGY_NODES = 12
_CHUNK = 1 << 16


class ExactDiffusion:
    """Exact reach probabilities by enumerating every live-edge outcome.

    For ``n <= 12`` the full distribution of the *set of sources reaching v*
    is tabulated per node, which answers set, node-strategy and set-strategy
    queries exactly.  Arcs with weight 0 or 1 are deterministic and do not
    count towards the enumeration limit under independent cascade.
    """

    def __init__(self, graph, model="ic"):
        self.graph = graph
        self.model = _as_model(model)
        self.model.validate(graph)
        self.n = graph.n
        self._configs = self._enumeration()
        self.dist = self._source_distribution() if self.n <= MAX_STRATEGY_NODES else None

    def _enumeration(self):
        g = self.graph
        if self.model.kind == "independent-cascade":
            random_arcs = np.flatnonzero((g.weight > 0.0) & (g.weight < 1.0))
            if random_arcs.size > MAX_RANDOM_ARCS:
                raise SizeError(f"{random_arcs.size} random arcs exceed the enumeration limit {MAX_RANDOM_ARCS}")
            return ("ic", random_arcs, np.flatnonzero(g.weight >= 1.0))
        radix = g.in_degree + 1
        total = int(np.prod(radix.astype(float)))
        if total > 1 << MAX_RANDOM_ARCS:
            raise SizeError("too many linear-threshold outcomes to enumerate")
        return ("lt", radix, total)

    def _chunks(self):
        """Yield ``(live, prob)``: boolean ``(c, A)`` live-arc matrix and outcome probabilities."""
        g = self.graph
        A = g.num_arcs
        kind = self._configs[0]
        if kind == "ic":
            _, rnd, sure = self._configs
            total = 1 << rnd.size
            w = g.weight[rnd]
            for lo in range(0, total, _CHUNK):
                cfg = np.arange(lo, min(total, lo + _CHUNK), dtype=np.int64)
                bits = ((cfg[:, None] >> np.arange(rnd.size)) & 1).astype(bool)
                prob = np.prod(np.where(bits, w, 1.0 - w), axis=1)
                live = np.zeros((cfg.size, A), dtype=bool)
                live[:, sure] = True
                live[:, rnd] = bits
                yield live, prob
            return
        _, radix, total = self._configs
        order = g.in_arcs
        for lo in range(0, total, _CHUNK):
            cfg = np.arange(lo, min(total, lo + _CHUNK), dtype=np.int64)
            live = np.zeros((cfg.size, A), dtype=bool)
            prob = np.ones(cfg.size)
            rest = cfg.copy()
            for v in range(g.n):
                d = int(radix[v]) - 1
                if d == 0:
                    continue
                choice = rest % (d + 1)
                rest //= d + 1
                arcs = order[g.in_ptr[v]:g.in_ptr[v + 1]]
                w = np.concatenate([g.weight[arcs], [max(0.0, 1.0 - g.weight[arcs].sum())]])
                prob *= w[choice]
                for j, a in enumerate(arcs):
                    live[:, a] = choice == j
            yield live, prob

    def _propagate(self, state, live):
        """Close ``state`` (int64 bitmasks or bools per node) along live arcs."""
        g = self.graph
        src, dst = g.src, g.dst
        is_bool = state.dtype == bool
        gate = live if is_bool else -live.astype(np.int64)
        for _ in range(max(1, self.n)):
            changed = False
            for a in range(g.num_arcs):
                u, v = src[a], dst[a]
                upd = state[:, v] | (state[:, u] & gate[:, a])
                if not changed and np.any(upd != state[:, v]):
                    changed = True
                state[:, v] = upd
            if not changed:
                break
        return state

    def _source_distribution(self):
        n = self.n
        dist = np.zeros((n, 1 << n))
        for live, prob in self._chunks():
            masks = np.broadcast_to(np.left_shift(1, np.arange(n, dtype=np.int64)), (prob.size, n)).copy()
            masks = self._propagate(masks, live)
            for v in range(n):
                dist[v] += np.bincount(masks[:, v], weights=prob, minlength=1 << n)
        return dist

    def sigma_set(self, S):
        S = _node_list(S, self.n)
        if self.dist is not None:
            smask = sum(1 << u for u in set(S))
            hit = (np.arange(1 << self.n) & smask) != 0
            return self.dist @ hit.astype(np.float64)
        out = np.zeros(self.n)
        for live, prob in self._chunks():
            state = np.zeros((prob.size, self.n), dtype=bool)
            state[:, S] = True
            out += prob @ self._propagate(state, live)
        return out

    def _require_dist(self):
        if self.dist is None:
            raise SizeError(f"strategy evaluation needs n <= {MAX_STRATEGY_NODES}")

    def sigma_node_strategy(self, x):
        self._require_dist()
        x = _check_x(x, self.n)
        none = np.ones(1 << self.n)
        idx = np.arange(1 << self.n)
        for i in range(self.n):
            none[((idx >> i) & 1) == 1] *= 1.0 - x[i]
        return self.dist @ (1.0 - none)

    def sigma_set_strategy(self, p):
        out = np.zeros(self.n)
        for S, prob in _support(p):
            out += prob * self.sigma_set(S)
        return out


def exact_sigma_bruteforce(graph, model="ic", S=None, x=None, p=None):
    """Exact per-node reach probabilities for exactly one of ``S``, ``x`` or ``p``."""
    given = [a is not None for a in (S, x, p)]
    if sum(given) != 1:
        raise ParameterError("pass exactly one of S, x, p")
    ex = ExactDiffusion(graph, model)
    if S is not None:
        return ex.sigma_set(S)
    if x is not None:
        return ex.sigma_node_strategy(x)
    return ex.sigma_set_strategy(p)
