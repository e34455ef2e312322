"""Graph and community data model, random generators and file ingestion."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ParameterError, ParseError

__all__ = [
    "DirectedWeightedGraph",
    "CommunityStructure",
    "WeightRule",
    "GeneratorSpec",
    "CommunityRule",
    "generate_graph",
    "planted_communities",
    "generate_communities",
    "load_edge_list",
    "load_communities",
    "graph_to_json",
    "graph_from_json",
    "save_instance",
    "load_instance",
]


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DirectedWeightedGraph:
    """Directed graph with arc weights in [0, 1].

    Arcs are stored as parallel arrays ``src``, ``dst``, ``weight``.  CSR-style
    out- and in-arc indexes are derived on construction.  ``labels`` optionally
    maps dense node ids back to the ids of an input file.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    labels: tuple | None = None
    out_ptr: np.ndarray = field(init=False, repr=False)
    out_arcs: np.ndarray = field(init=False, repr=False)
    in_ptr: np.ndarray = field(init=False, repr=False)
    in_arcs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ParameterError(f"graph needs at least one node, got n={n}")
        src = _frozen(self.src, np.int64)
        dst = _frozen(self.dst, np.int64)
        weight = _frozen(self.weight, np.float64)
        if not (src.shape == dst.shape == weight.shape) or src.ndim != 1:
            raise ParameterError("src, dst and weight must be 1-d arrays of equal length")
        if src.size:
            if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
                raise ParameterError(f"arc endpoint outside 0..{n - 1}")
            if not np.all(np.isfinite(weight)) or weight.min() < 0.0 or weight.max() > 1.0:
                raise ParameterError("arc weights must lie in [0, 1]")
            keys = src * n + dst
            if np.unique(keys).size != keys.size:
                raise ParameterError("duplicate arcs (same source and target)")
        if self.labels is not None and len(self.labels) != n:
            raise ParameterError("labels must have one entry per node")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", weight)
        out_order = np.lexsort((dst, src))
        in_order = np.lexsort((src, dst))
        object.__setattr__(self, "out_arcs", _frozen(out_order, np.int64))
        object.__setattr__(self, "in_arcs", _frozen(in_order, np.int64))
        object.__setattr__(self, "out_ptr", _frozen(_ptr(src, n), np.int64))
        object.__setattr__(self, "in_ptr", _frozen(_ptr(dst, n), np.int64))

    @classmethod
    def from_arcs(cls, n, arcs, labels=None):
        arcs = list(arcs)
        if arcs:
            a = np.asarray(arcs, dtype=np.float64)
            return cls(n, a[:, 0].astype(np.int64), a[:, 1].astype(np.int64), a[:, 2], labels)
        empty = np.zeros(0)
        return cls(n, empty, empty, empty, labels)

    @property
    def num_arcs(self):
        return int(self.src.size)

    def arcs(self):
        """List of ``(u, v, w)`` triples in storage order."""
        return [(int(u), int(v), float(w)) for u, v, w in zip(self.src, self.dst, self.weight)]

    def out_neighbors(self, u):
        idx = self.out_arcs[self.out_ptr[u]:self.out_ptr[u + 1]]
        return self.dst[idx]

    def in_neighbors(self, v):
        idx = self.in_arcs[self.in_ptr[v]:self.in_ptr[v + 1]]
        return self.src[idx]

    @cached_property
    def out_degree(self):
        return np.diff(self.out_ptr)

    @cached_property
    def in_degree(self):
        return np.diff(self.in_ptr)

    @cached_property
    def in_weight_sum(self):
        return np.bincount(self.dst, weights=self.weight, minlength=self.n)

    def adjacency(self):
        """Sparse ``n x n`` matrix with entry ``w`` at ``(u, v)``."""
        return sp.csr_matrix((self.weight, (self.src, self.dst)), shape=(self.n, self.n))


def _ptr(keys, n):
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr


@dataclass(frozen=True, eq=False)
class CommunityStructure:
    """``m >= 1`` non-empty, possibly overlapping node sets over ``n`` nodes."""

    n: int
    communities: tuple

    def __post_init__(self):
        comms = tuple(tuple(sorted({int(v) for v in c})) for c in self.communities)
        if not comms:
            raise ParameterError("a community structure needs at least one community")
        for c in comms:
            if not c:
                raise ParameterError("communities must be non-empty")
            if c[0] < 0 or c[-1] >= self.n:
                raise ParameterError(f"community member outside 0..{self.n - 1}")
        object.__setattr__(self, "communities", comms)

    def __len__(self):
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    def __getitem__(self, i):
        return self.communities[i]

    @property
    def m(self):
        return len(self.communities)

    @cached_property
    def sizes(self):
        return np.array([len(c) for c in self.communities], dtype=np.int64)

    @cached_property
    def membership(self):
        """0/1 sparse matrix of shape ``(m, n)``."""
        rows = np.repeat(np.arange(self.m), self.sizes)
        cols = np.fromiter((v for c in self.communities for v in c), dtype=np.int64)
        data = np.ones(cols.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.m, self.n))

    @classmethod
    def singletons(cls, n):
        return cls(n, tuple((v,) for v in range(n)))


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class WeightRule:
    """How arc weights are assigned: ``uniform(lo, hi)`` or ``constant(c)``."""

    kind: str = "constant"
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "constant"):
            raise ParameterError(f"unknown weight rule {self.kind!r}")
        if not (0.0 <= self.lo <= 1.0 and 0.0 <= self.hi <= 1.0):
            raise ParameterError("weight bounds must lie in [0, 1]")
        if self.kind == "uniform" and self.lo > self.hi:
            raise ParameterError("uniform weight rule needs lo <= hi")

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c), float(c))

    @classmethod
    def parse(cls, text):
        """Parse ``"uniform:0,0.4"`` or ``"constant:0.05"``."""
        try:
            kind, _, args = text.partition(":")
            vals = [float(s) for s in args.split(",") if s.strip()]
            if kind == "uniform" and len(vals) == 2:
                return cls.uniform(*vals)
            if kind == "constant" and len(vals) == 1:
                return cls.constant(vals[0])
        except ValueError:
            pass
        raise ParameterError(f"cannot parse weight rule {text!r}")

    def draw(self, rng, size):
        if self.kind == "constant":
            return np.full(size, self.lo)
        return rng.uniform(self.lo, self.hi, size)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.lo}
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "constant":
            return cls.constant(d["value"])
        return cls.uniform(d["lo"], d["hi"])


GENERATOR_KINDS = ("barabasi-albert", "block-stochastic", "core-periphery")

_DEFAULT_PARAMS = {
    "barabasi-albert": {"n": 100, "attachment": 2, "initial": None},
    "block-stochastic": {"sizes": [100, 100], "p": 0.1, "q": 0.01},
    "core-periphery": {"core": 50, "periphery": 150, "p_core": 0.5, "p_periphery": 0.1, "q": 0.1},
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    weights: WeightRule = field(default_factory=lambda: WeightRule.uniform(0.0, 0.4))
    seed: int = 0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ParameterError(f"unknown generator {self.kind!r}; expected one of {GENERATOR_KINDS}")
        merged = dict(_DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ParameterError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        for name in ("p", "q", "p_core", "p_periphery"):
            if name in merged and not 0.0 <= float(merged[name]) <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1]")
        if self.kind == "barabasi-albert":
            a = int(merged["attachment"])
            init = a if merged["initial"] is None else int(merged["initial"])
            if a < 1 or init < a or int(merged["n"]) < init:
                raise ParameterError("barabasi-albert needs 1 <= attachment <= initial <= n")
        elif self.kind == "block-stochastic":
            if not merged["sizes"] or min(int(s) for s in merged["sizes"]) < 1:
                raise ParameterError("block sizes must be positive")
        else:
            if int(merged["core"]) < 1 or int(merged["periphery"]) < 1:
                raise ParameterError("core and periphery must be non-empty")

    def replace_seed(self, seed):
        return GeneratorSpec(self.kind, dict(self.params), self.weights, int(seed))

    def to_dict(self):
        return {"kind": self.kind, "params": self.params, "weights": self.weights.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        w = d.get("weights")
        weights = WeightRule.from_dict(w) if w is not None else default_weight_rule(d["kind"])
        return cls(d["kind"], dict(d.get("params", {})), weights, int(d.get("seed", 0)))


def default_weight_rule(kind):
    """Edge-weight conventions of the experimental protocol."""
    if kind in ("block-stochastic", "core-periphery"):
        return WeightRule.constant(0.05)
    if kind == "real-world":
        return WeightRule.uniform(0.0, 0.2)
    return WeightRule.uniform(0.0, 0.4)


def _undirected(n, edges, rule, rng, labels=None):
    """Materialize undirected edges as two opposing arcs with one shared weight."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w = rule.draw(rng, len(edges))
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    return DirectedWeightedGraph(n, src[order], dst[order], np.concatenate([w, w])[order], labels)


def _barabasi_albert(n, attachment, initial, rng):
    # seed nodes start isolated; the first newcomer links to `attachment` of them
    edges = []
    repeated = []
    for new in range(initial, n):
        if repeated:
            pool = np.asarray(repeated)
            targets = set()
            while len(targets) < attachment:
                targets.add(int(pool[rng.integers(pool.size)]))
            targets = sorted(targets)
        else:
            targets = sorted(int(t) for t in rng.choice(initial, size=attachment, replace=False))
        for t in targets:
            edges.append((t, new))
        repeated.extend(targets)
        repeated.extend([new] * attachment)
    return edges


def _block_edges(sizes, intra, q, rng):
    n = int(sum(sizes))
    block = np.repeat(np.arange(len(sizes)), sizes)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], np.asarray(intra, dtype=float)[block[iu]], q)
    keep = rng.random(iu.size) < prob
    return n, np.stack([iu[keep], ju[keep]], axis=1)


def generate_graph(spec: GeneratorSpec) -> DirectedWeightedGraph:
    """Draw a random graph; the result depends only on ``spec`` (including its seed)."""
    rng = np.random.default_rng(spec.seed)
    p = spec.params
    if spec.kind == "barabasi-albert":
        a = int(p["attachment"])
        init = a if p["initial"] is None else int(p["initial"])
        n = int(p["n"])
        edges = _barabasi_albert(n, a, init, rng)
    elif spec.kind == "block-stochastic":
        sizes = [int(s) for s in p["sizes"]]
        n, edges = _block_edges(sizes, [float(p["p"])] * len(sizes), float(p["q"]), rng)
    else:
        sizes = [int(p["core"]), int(p["periphery"])]
        n, edges = _block_edges(sizes, [float(p["p_core"]), float(p["p_periphery"])], float(p["q"]), rng)
    return _undirected(n, edges, spec.weights, rng)


def planted_communities(spec: GeneratorSpec) -> CommunityStructure:
    """The blocks of a block-stochastic or core-periphery spec (core first)."""
    p = spec.params
    if spec.kind == "block-stochastic":
        sizes = [int(s) for s in p["sizes"]]
    elif spec.kind == "core-periphery":
        sizes = [int(p["core"]), int(p["periphery"])]
    else:
        raise ParameterError(f"{spec.kind} graphs carry no planted communities")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    n = int(bounds[-1])
    return CommunityStructure(n, tuple(tuple(range(bounds[i], bounds[i + 1])) for i in range(len(sizes))))


# ---------------------------------------------------------------------------
# community rules


@dataclass(frozen=True)
class CommunityRule:
    kind: str
    m: int | None = None
    sizes: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("singleton", "bfs", "random-imbalanced"):
            raise ParameterError(f"unknown community rule {self.kind!r}")
        if self.kind == "bfs" and (self.m is None or self.m < 1):
            raise ParameterError("bfs rule needs m >= 1")
        if self.kind == "random-imbalanced" and (not self.sizes or min(self.sizes) < 1):
            raise ParameterError("random-imbalanced rule needs positive sizes")

    @classmethod
    def parse(cls, text):
        """``singleton`` | ``bfs:M`` | ``random-imbalanced:S1,S2,...``"""
        kind, _, arg = str(text).partition(":")
        try:
            if kind == "singleton" and not arg:
                return cls("singleton")
            if kind == "bfs":
                return cls("bfs", m=int(arg))
            if kind in ("random-imbalanced", "imbalanced"):
                return cls("random-imbalanced", sizes=tuple(int(s) for s in arg.split(",")))
        except ValueError:
            pass
        raise ParameterError(f"cannot parse community rule {text!r}")

    def __str__(self):
        if self.kind == "bfs":
            return f"bfs:{self.m}"
        if self.kind == "random-imbalanced":
            return "random-imbalanced:" + ",".join(map(str, self.sizes))
        return self.kind


def imbalanced_sizes(n, fractions=(4, 3, 2, 1), denom=10):
    """Sizes ``4n/10, 3n/10, 2n/10, n/10`` (floored)."""
    return tuple(n * f // denom for f in fractions)


def generate_communities(graph: DirectedWeightedGraph, rule, seed=0) -> CommunityStructure:
    if isinstance(rule, str):
        rule = CommunityRule.parse(rule)
    n = graph.n
    rng = np.random.default_rng(seed)
    if rule.kind == "singleton":
        return CommunityStructure.singletons(n)
    if rule.kind == "random-imbalanced":
        if sum(rule.sizes) > n:
            raise ParameterError(f"community sizes sum to {sum(rule.sizes)} > n={n}")
        perm = rng.permutation(n)
        bounds = np.concatenate([[0], np.cumsum(rule.sizes)])
        return CommunityStructure(n, tuple(tuple(perm[bounds[i]:bounds[i + 1]]) for i in range(len(rule.sizes))))
    m = rule.m
    if m > n:
        raise ParameterError(f"cannot grow m={m} communities on n={n} nodes")
    size = n // m
    assigned = np.zeros(n, dtype=bool)
    comms = []
    for _ in range(m):
        members = []
        queue = deque()
        while len(members) < size:
            if not queue:
                free = np.flatnonzero(~assigned)
                s = int(free[rng.integers(free.size)])
                assigned[s] = True
                members.append(s)
                queue.append(s)
                continue
            u = queue.popleft()
            for v in graph.out_neighbors(u):
                if len(members) >= size:
                    break
                if not assigned[v]:
                    assigned[v] = True
                    members.append(int(v))
                    queue.append(int(v))
        comms.append(tuple(members))
    return CommunityStructure(n, tuple(comms))


# ---------------------------------------------------------------------------
# file ingestion


def load_edge_list(path, undirected=False, weights: WeightRule | None = None, seed=0, lwcc=False):
    """Read a whitespace-separated ``u v [w]`` edge list.

    Node ids are remapped densely in sorted order of the original ids; the
    original ids are kept in ``graph.labels``.  Self-loops are dropped and
    repeated edges keep their first occurrence.
    """
    weights = weights or default_weight_rule("real-world")
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'u v [w]', got {s!r}", path, lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else None
            except ValueError:
                raise ParseError(f"non-numeric field in {s!r}", path, lineno) from None
            if w is not None and not 0.0 <= w <= 1.0:
                raise ParseError(f"weight {w} outside [0, 1]", path, lineno)
            rows.append((u, v, w))
    return _graph_from_rows(rows, undirected, weights, seed, lwcc)


def _graph_from_rows(rows, undirected, weights, seed, lwcc):
    rng = np.random.default_rng(seed)
    seen = {}
    for u, v, w in rows:
        if u == v:
            continue
        key = (min(u, v), max(u, v)) if undirected else (u, v)
        if key not in seen:
            seen[key] = w
    labels = sorted({x for key in seen for x in key})
    if not labels:
        raise ParseError("edge list contains no edges")
    index = {lab: i for i, lab in enumerate(labels)}
    keys = list(seen)
    drawn = weights.draw(rng, len(keys))
    wts = np.array([seen[k] if seen[k] is not None else drawn[i] for i, k in enumerate(keys)], dtype=float)
    e = np.array([(index[a], index[b]) for a, b in keys], dtype=np.int64).reshape(-1, 2)
    if undirected:
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        wts = np.concatenate([wts, wts])
    else:
        src, dst = e[:, 0], e[:, 1]
    n = len(labels)
    if lwcc and src.size:
        adj = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))
        _, comp = connected_components(adj, directed=True, connection="weak")
        counts = np.bincount(comp)
        keep_nodes = np.flatnonzero(comp == np.argmax(counts))
        remap = -np.ones(n, dtype=np.int64)
        remap[keep_nodes] = np.arange(keep_nodes.size)
        keep = remap[src] >= 0
        src, dst, wts = remap[src[keep]], remap[dst[keep]], wts[keep]
        labels = [labels[i] for i in keep_nodes]
        n = len(labels)
    order = np.lexsort((dst, src))
    return DirectedWeightedGraph(n, src[order], dst[order], wts[order], tuple(labels))


def load_communities(path, graph: DirectedWeightedGraph, order="community-first") -> CommunityStructure:
    """Read two integer columns assigning nodes to communities.

    When the graph carries labels from an edge-list load, node ids are looked
    up among the original ids; otherwise they must be dense ids.
    """
    if order not in ("community-first", "node-first"):
        raise ParameterError(f"unknown column order {order!r}")
    path = Path(path)
    index = {lab: i for i, lab in enumerate(graph.labels)} if graph.labels is not None else None
    groups: dict[int, set] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ParseError(f"expected two columns, got {s!r}", path, lineno)
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer field in {s!r}", path, lineno) from None
            cid, node = (a, b) if order == "community-first" else (b, a)
            if index is not None:
                if node not in index:
                    raise ParseError(f"node {node} not in graph", path, lineno)
                node = index[node]
            elif not 0 <= node < graph.n:
                raise ParseError(f"node id {node} outside 0..{graph.n - 1}", path, lineno)
            groups.setdefault(cid, set()).add(node)
    if not groups:
        raise ParseError("community file assigns no nodes", path)
    return CommunityStructure(graph.n, tuple(tuple(groups[c]) for c in sorted(groups)))


# ---------------------------------------------------------------------------
# JSON fixtures


def graph_to_json(graph: DirectedWeightedGraph, communities: CommunityStructure | None = None) -> dict:
    d = {"n": graph.n, "arcs": [[u, v, w] for u, v, w in graph.arcs()]}
    if communities is not None:
        d["communities"] = [list(c) for c in communities]
    if graph.labels is not None:
        d["labels"] = list(graph.labels)
    return d


def graph_from_json(d: dict):
    """Inverse of :func:`graph_to_json`; returns ``(graph, communities or None)``."""
    try:
        labels = tuple(d["labels"]) if d.get("labels") is not None else None
        g = DirectedWeightedGraph.from_arcs(int(d["n"]), [tuple(a) for a in d["arcs"]], labels)
        comms = None
        if d.get("communities") is not None:
            comms = CommunityStructure(g.n, tuple(tuple(c) for c in d["communities"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed graph JSON: {exc}") from None
    return g, comms


def save_instance(path, graph, communities=None):
    Path(path).write_text(json.dumps(graph_to_json(graph, communities)), encoding="utf-8")


def load_instance(path):
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path) from None
    return graph_from_json(d)


def rebuild(graph: DirectedWeightedGraph) -> DirectedWeightedGraph:
    """Construct a fresh graph from the arc list alone."""
    return DirectedWeightedGraph.from_arcs(graph.n, graph.arcs(), graph.labels)

