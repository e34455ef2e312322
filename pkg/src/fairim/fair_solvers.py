"""Fair seeding strategies via multiplicative weights over community duals."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .diffusion import LiveEdgeSample, community_value
from .errors import ParameterError, ParseError
from .graph_core import CommunityStructure
from .oracle_greedy import greedy_weighted_im, weights_from_community_duals

__all__ = [
    "FEASIBILITY_TOL",
    "NodeStrategy",
    "SetStrategy",
    "MWConfig",
    "MWState",
    "iteration_bound",
    "run_multiplicative_weights",
    "solve_set_based",
    "solve_node_based",
    "uniform_node_strategy",
    "lambda_value",
    "independent_reach",
    "truncated_reach",
    "sample_from_node_strategy",
    "sample_from_set_strategy",
    "strategy_from_dict",
    "load_strategy",
    "save_strategy",
]

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NodeStrategy:
    """Independent seeding probabilities ``x`` with ``sum(x) <= k``."""

    x: np.ndarray
    k: float

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise ParameterError("node strategy needs a non-empty vector")
        if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
            raise ParameterError("node probabilities must lie in [0, 1]")
        if x.sum() > self.k + FEASIBILITY_TOL:
            raise ParameterError(f"expected seed count {x.sum():.6g} exceeds budget {self.k}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self):
        return self.x.size

    def marginals(self):
        return self.x

    def to_dict(self):
        return {"kind": "node", "k": self.k, "x": self.x.tolist()}


@dataclass(frozen=True, eq=False)
class SetStrategy:
    """A finite distribution over seed sets with expected size at most ``k``."""

    support: tuple
    k: float
    n: int | None = None

    def __post_init__(self):
        items = []
        for S, p in self.support:
            S = tuple(sorted({int(u) for u in S}))
            p = float(p)
            if not p > 0.0:
                raise ParameterError("support probabilities must be positive")
            if S and self.n is not None and (S[0] < 0 or S[-1] >= self.n):
                raise ParameterError(f"seed node outside 0..{self.n - 1}")
            items.append((S, p))
        if not items:
            raise ParameterError("set strategy needs a non-empty support")
        total = sum(p for _, p in items)
        if abs(total - 1.0) > FEASIBILITY_TOL:
            raise ParameterError(f"support probabilities sum to {total!r}, not 1")
        size = sum(p * len(S) for S, p in items)
        if size > self.k + FEASIBILITY_TOL:
            raise ParameterError(f"expected seed count {size:.6g} exceeds budget {self.k}")
        object.__setattr__(self, "support", tuple(items))

    def expected_size(self):
        return sum(p * len(S) for S, p in self.support)

    def marginals(self, n=None):
        n = self.n if n is None else n
        out = np.zeros(n)
        for S, p in self.support:
            out[list(S)] += p
        return out

    def to_dict(self):
        d = {"kind": "set", "k": self.k}
        if self.n is not None:
            d["n"] = self.n
        d["support"] = [{"set": list(S), "p": p} for S, p in self.support]
        return d


def strategy_from_dict(d):
    """Inverse of ``to_dict``; deterministic seed sets use ``{"kind": "seeds", "set": [...]}``."""
    try:
        kind = d["kind"]
        if kind == "node":
            return NodeStrategy(np.asarray(d["x"], dtype=np.float64), d["k"])
        if kind == "set":
            support = [(e["set"], e["p"]) for e in d["support"]]
            return SetStrategy(support, d["k"], d.get("n"))
        if kind == "seeds":
            return frozenset(int(u) for u in d["set"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed strategy: {exc}") from exc
    raise ParseError(f"unknown strategy kind {kind!r}")


def strategy_to_dict(strategy):
    if isinstance(strategy, (NodeStrategy, SetStrategy)):
        return strategy.to_dict()
    return {"kind": "seeds", "set": sorted(int(u) for u in strategy)}


def save_strategy(path, strategy, meta=None):
    d = strategy_to_dict(strategy)
    if meta:
        d["meta"] = meta
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")


def load_strategy(path, with_meta=False):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc
    if not isinstance(d, dict):
        raise ParseError("strategy file must hold a JSON object", path=str(path))
    strategy = strategy_from_dict(d)
    return (strategy, d.get("meta", {})) if with_meta else strategy


# ---------------------------------------------------------------------------
# multiplicative weights


@dataclass
class MWConfig:
    """Step size and stopping rules for the multiplicative-weights loop.

    ``iterations`` fixes the iteration count and disables early stopping.
    Otherwise the count is the theoretical bound capped by
    ``max_iterations``, and the loop stops once the running minimum of the
    averaged strategy moves by less than ``tol`` (relative) across the last
    ``window`` checkpoints taken every ``check_every`` iterations.
    """

    eta: float = 0.1
    max_iterations: int = 2000
    iterations: int | None = None
    check_every: int = 10
    window: int = 20
    tol: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterError(f"eta must lie in (0, 1), got {self.eta}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        if self.iterations is not None and self.iterations < 1:
            raise ParameterError("iterations must be positive")
        if self.check_every < 1 or self.window < 2 or self.tol < 0:
            raise ParameterError("invalid convergence settings")

    def planned_iterations(self, n, m, k):
        if self.iterations is not None:
            return int(self.iterations)
        return min(iteration_bound(self.eta, m, n, k), self.max_iterations)


def iteration_bound(eta, m, n, k):
    """``max(1, ceil(eta^-2 * ln(m) * n / k))``; the floor covers ``m = 1``."""
    return max(1, math.ceil(eta ** -2 * math.log(m) * n / k))


@dataclass
class MWState:
    z: np.ndarray
    history: list = field(default_factory=list)
    values: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    planned: int = 0

    @property
    def iterations(self):
        return len(self.history)

    def running_min(self):
        """Minimum community value of the averaged strategy so far."""
        return float(np.min(np.mean(self.values, axis=0)))


def _normalized(log_z):
    z = np.exp(log_z - log_z.max())
    z /= z.sum()
    return np.maximum(z, np.finfo(float).tiny)


def run_multiplicative_weights(sample: LiveEdgeSample, communities: CommunityStructure, k, cfg=None) -> MWState:
    """Covering loop with the weighted greedy as oracle; returns every oracle set."""
    cfg = cfg or MWConfig()
    n, m = sample.n, communities.m
    if communities.n != n:
        raise ParameterError("communities and sample disagree on n")
    if not 1 <= k <= n:
        raise ParameterError(f"budget k={k} must lie in 1..{n}")
    planned = cfg.planned_iterations(n, m, k)
    early = cfg.iterations is None
    log_z = np.zeros(m)
    state = MWState(z=_normalized(log_z), planned=planned)
    total = np.zeros(m)
    for it in range(1, planned + 1):
        omega = weights_from_community_duals(state.z, communities)
        S = greedy_weighted_im(sample, omega, k).order
        vals = community_value(sample.sigma_set(S), communities)
        log_z -= cfg.eta * vals
        state.z = _normalized(log_z)
        total += vals
        state.history.append(tuple(sorted(S)))
        state.values.append(vals)
        if it % cfg.check_every == 0:
            state.snapshots.append((it, float(np.min(total / it))))
            if early and _converged(state.snapshots, cfg):
                break
    return state


def _converged(snapshots, cfg):
    if len(snapshots) < cfg.window:
        return False
    recent = [v for _, v in snapshots[-cfg.window:]]
    hi, lo = max(recent), min(recent)
    return hi - lo <= cfg.tol * max(hi, 1e-12)


def _strategy_from_history(history, k, n):
    counts = Counter(history)
    N = len(history)
    # first-appearance order keeps the support deterministic
    support = [(S, counts[S] / N) for S in dict.fromkeys(history)]
    return SetStrategy(support, k, n)


def solve_set_based(sample, communities, k, cfg=None, state=None) -> SetStrategy:
    """Uniform distribution over the oracle sets, duplicates merged."""
    state = state or run_multiplicative_weights(sample, communities, k, cfg)
    return _strategy_from_history(state.history, k, sample.n)


def solve_node_based(sample, communities, k, cfg=None, state=None) -> NodeStrategy:
    """Mean of the oracle sets' indicator vectors."""
    state = state or run_multiplicative_weights(sample, communities, k, cfg)
    hits = np.bincount(np.concatenate([np.asarray(S, dtype=np.int64) for S in state.history]), minlength=sample.n)
    return NodeStrategy(np.minimum(hits / len(state.history), 1.0), k)


def uniform_node_strategy(n, k) -> NodeStrategy:
    if not 0 < k <= n:
        raise ParameterError(f"budget k={k} must lie in (0, {n}]")
    return NodeStrategy(np.full(n, k / n), k)


def lambda_value(sample: LiveEdgeSample, x, communities: CommunityStructure):
    """Per-community truncated-linear coverage of a node strategy on the sample."""
    return community_value(sample.truncated_coverage(x), communities)


def independent_reach(xs):
    """``1 - prod(1 - x_i)`` for the sources reaching one node, summed term by term.

    Each term ``x_r * prod_{i<r}(1 - x_i)`` is at most ``x_r`` in floating
    point, so the result never exceeds ``truncated_reach`` of the same list.
    """
    q, miss = 0.0, 1.0
    for xi in xs:
        q += xi * miss
        miss *= 1.0 - xi
    return min(1.0, q)


def truncated_reach(xs):
    s = 0.0
    for xi in xs:
        s += xi
    return min(1.0, s)


def sample_from_node_strategy(x, seed) -> frozenset:
    x = np.asarray(getattr(x, "x", x), dtype=np.float64)
    rng = np.random.default_rng(seed)
    return frozenset(int(u) for u in np.flatnonzero(rng.random(x.size) < x))


def sample_from_set_strategy(p, seed) -> frozenset:
    support = getattr(p, "support", p)
    if not support:
        raise ParameterError("cannot sample from an empty support")
    probs = np.array([q for _, q in support], dtype=np.float64)
    rng = np.random.default_rng(seed)
    i = rng.choice(len(support), p=probs / probs.sum())
    return frozenset(support[i][0])
