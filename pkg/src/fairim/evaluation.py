"""Fairness metrics, price of fairness and tiny-instance reference optima."""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from .diffusion import ExactDiffusion, LiveEdgeSample, community_value, derive_seed
from .errors import ParameterError, SizeError
from .fair_solvers import NodeStrategy, SetStrategy, sample_from_node_strategy, sample_from_set_strategy
from .graph_core import CommunityStructure, DirectedWeightedGraph
from .oracle_greedy import greedy_weighted_im

__all__ = [
    "CSV_COLUMNS",
    "EvaluationReport",
    "PoFReport",
    "evaluate_strategy",
    "ex_post_distribution",
    "empirical_pof",
    "bruteforce_opt_node",
    "bruteforce_opt_set",
    "write_csv",
]

CSV_COLUMNS = (
    "algorithm", "n", "m", "k", "T_opt", "T_eval", "ex_ante", "ex_post",
    "spread", "runtime_ms", "seed", "graph_seed",
)
RUNTIME_COLUMNS = ("runtime_ms",)


@dataclass
class EvaluationReport:
    algorithm: str
    n: int
    m: int
    k: float
    T_opt: int
    T_eval: int
    ex_ante: float
    ex_post: float
    spread: float
    runtime_ms: float
    seed: int
    graph_seed: int | None = None
    per_community: np.ndarray = field(default=None, repr=False)
    ex_post_set: tuple = ()

    def row(self):
        return {c: getattr(self, c) for c in CSV_COLUMNS}

    def to_dict(self):
        d = asdict(self)
        d["per_community"] = None if self.per_community is None else np.asarray(self.per_community).tolist()
        d["ex_post_set"] = list(self.ex_post_set)
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    def to_csv(self, header=True):
        buf = io.StringIO()
        write_csv(buf, [self], header=header)
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_csv(fh, reports, header=True):
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for r in reports:
        row = r.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def _strategy_vector(strategy, evaluator):
    if isinstance(strategy, NodeStrategy):
        return evaluator.sigma_node_strategy(strategy.x)
    if isinstance(strategy, SetStrategy):
        return evaluator.sigma_set_strategy(strategy)
    return evaluator.sigma_set(sorted(strategy))


def draw_seed_set(strategy, seed):
    """One concrete seed set from any strategy; deterministic sets are returned as is."""
    if isinstance(strategy, NodeStrategy):
        return sample_from_node_strategy(strategy.x, seed)
    if isinstance(strategy, SetStrategy):
        return sample_from_set_strategy(strategy, seed)
    return frozenset(int(u) for u in strategy)


def evaluate_strategy(strategy, evaluator, communities: CommunityStructure, seed=0, *,
                      algorithm="", k=None, T_opt=0, runtime_ms=0.0, graph_seed=None) -> EvaluationReport:
    """Ex-ante and single-draw ex-post minimum community values.

    ``evaluator`` is a ``LiveEdgeSample`` (the evaluation sample) or an
    ``ExactDiffusion``; both expose the same three estimators.
    """
    vec = _strategy_vector(strategy, evaluator)
    per = community_value(vec, communities)
    S0 = draw_seed_set(strategy, seed)
    if isinstance(strategy, (NodeStrategy, SetStrategy)):
        post = community_value(evaluator.sigma_set(sorted(S0)), communities)
    else:
        post = per
    if k is None:
        k = strategy.k if isinstance(strategy, (NodeStrategy, SetStrategy)) else len(S0)
    return EvaluationReport(
        algorithm=algorithm,
        n=int(evaluator.n),
        m=communities.m,
        k=k,
        T_opt=int(T_opt),
        T_eval=int(getattr(evaluator, "T", 0)),
        ex_ante=float(per.min()),
        ex_post=float(post.min()),
        spread=float(vec.sum()),
        runtime_ms=float(runtime_ms),
        seed=int(seed),
        graph_seed=graph_seed,
        per_community=per,
        ex_post_set=tuple(sorted(S0)),
    )


def ex_post_distribution(strategy, evaluator, communities, draws=200, seed=0):
    """Ex-post minimum community value for ``draws`` independent draws."""
    out = np.empty(draws)
    for i in range(draws):
        S = draw_seed_set(strategy, derive_seed(seed, i))
        out[i] = community_value(evaluator.sigma_set(sorted(S)), communities).min()
    return out


@dataclass
class PoFReport:
    numerator: float
    denominator: float
    ratio: float
    infinite: bool
    greedy_set: tuple

    def to_dict(self):
        return asdict(self)


def empirical_pof(sample: LiveEdgeSample, fair, k, evaluator=None) -> PoFReport:
    """Spread of the greedy-IM set over the spread of the fair strategy.

    The greedy set is chosen on ``sample``; both spreads are measured with
    ``evaluator`` (the sample itself by default).  The denominator is the
    single fair strategy passed in.
    """
    evaluator = sample if evaluator is None else evaluator
    greedy = greedy_weighted_im(sample, np.ones(sample.n), k).order
    num = float(evaluator.sigma_set(sorted(greedy)).sum())
    den = float(_strategy_vector(fair, evaluator).sum())
    if den <= 0.0:
        return PoFReport(num, den, float("inf"), True, tuple(sorted(greedy)))
    return PoFReport(num, den, num / den, False, tuple(sorted(greedy)))


# ---------------------------------------------------------------------------
# reference optima for tiny instances


def _none_reached(X, n):
    # X: (G, n) grid of node strategies -> (G, 2^n) probability that exactly
    # no source in each bitmask is seeded
    idx = np.arange(1 << n)
    out = np.ones((X.shape[0], 1 << n))
    for i in range(n):
        out[:, ((idx >> i) & 1) == 1] *= (1.0 - X[:, i])[:, None]
    return out


def bruteforce_opt_node(graph: DirectedWeightedGraph, model, communities: CommunityStructure, k,
                        resolution=0.01, return_x=False):
    """Grid search for the best node-based max-min value (``n <= 3``)."""
    n = graph.n
    if n > 3:
        raise SizeError(f"node-based grid search supports n <= 3, got {n}")
    steps = int(round(1.0 / resolution))
    if steps < 1:
        raise ParameterError("resolution must be in (0, 1]")
    axis = np.arange(steps + 1) / steps
    X = np.array(list(itertools.product(axis, repeat=n)))
    X = X[X.sum(axis=1) <= k + 1e-12]
    dist = ExactDiffusion(graph, model).dist
    sigma = (1.0 - _none_reached(X, n)) @ dist.T
    vals = (communities.membership @ sigma.T).T / communities.sizes
    worst = vals.min(axis=1)
    best = int(np.argmax(worst))
    if return_x:
        return float(worst[best]), X[best]
    return float(worst[best])


def _subset_table(graph, model, communities):
    n = graph.n
    ex = ExactDiffusion(graph, model)
    subsets = [tuple(u for u in range(n) if mask >> u & 1) for mask in range(1 << n)]
    F = np.array([community_value(ex.sigma_set(S), communities) for S in subsets])
    sizes = np.array([len(S) for S in subsets], dtype=np.float64)
    return subsets, F, sizes


def bruteforce_opt_set(graph: DirectedWeightedGraph, model, communities: CommunityStructure, k,
                       method="lp", eta=0.005, iterations=200_000):
    """Best set-based max-min value over all ``2^n`` seed sets (``n <= 4``).

    ``method="lp"`` solves the max-min linear program exactly;
    ``method="mw"`` runs multiplicative weights with an exact best-response
    oracle, which lands within a factor ``1 - eta`` of the optimum.
    """
    n = graph.n
    if n > 4:
        raise SizeError(f"set-based brute force supports n <= 4, got {n}")
    _, F, sizes = _subset_table(graph, model, communities)
    if method == "lp":
        return _opt_set_lp(F, sizes, k)
    if method == "mw":
        return _opt_set_mw(F, sizes, k, eta, iterations)
    raise ParameterError(f"unknown method {method!r}")


def _opt_set_lp(F, sizes, k):
    s, m = F.shape
    c = np.zeros(s + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-F.T, np.ones((m, 1))])
    A_ub = np.vstack([A_ub, np.append(sizes, 0.0)])
    b_ub = np.append(np.zeros(m), float(k))
    A_eq = np.append(np.ones(s), 0.0)[None, :]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, 1)] * s + [(0, None)], method="highs")
    if res.status != 0:
        raise ParameterError(f"reference LP failed: {res.message}")
    return float(-res.fun)


def _opt_set_mw(F, sizes, k, eta, iterations):
    s, m = F.shape
    by_size = [np.flatnonzero(sizes == j) for j in range(int(sizes.max()) + 1)]
    feasible = [j for j in range(len(by_size)) if by_size[j].size]
    log_z = np.zeros(m)
    total = np.zeros(m)
    for _ in range(iterations):
        z = np.exp(log_z - log_z.max())
        score = F @ z
        best = {j: by_size[j][np.argmax(score[by_size[j]])] for j in feasible}
        # best response over the budget polytope mixes at most two set sizes
        cand = [(score[best[j]], F[best[j]]) for j in feasible if j <= k]
        for lo in feasible:
            for hi in feasible:
                if lo < k < hi:
                    a = (hi - k) / (hi - lo)
                    cand.append((a * score[best[lo]] + (1 - a) * score[best[hi]],
                                 a * F[best[lo]] + (1 - a) * F[best[hi]]))
        f = max(cand, key=lambda t: t[0])[1]
        log_z -= eta * f
        total += f
    return float((total / iterations).min())
