"""Command-line experiment driver: ``fairim generate | solve | evaluate``."""
from __future__ import annotations

import argparse
import json
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .diffusion import DiffusionModel, EstimatorParams, derive_seed, sample_live_edges
from .errors import ConfigError, FairIMError
from .evaluation import evaluate_strategy, write_csv
from .fair_solvers import (
    MWConfig,
    load_strategy,
    run_multiplicative_weights,
    save_strategy,
    solve_node_based,
    solve_set_based,
    uniform_node_strategy,
)
from .graph_core import (
    CommunityRule,
    CommunityStructure,
    GeneratorSpec,
    WeightRule,
    default_weight_rule,
    generate_communities,
    generate_graph,
    load_communities,
    load_edge_list,
    load_instance,
    planted_communities,
    save_instance,
)
from .oracle_greedy import greedy_maximin, greedy_weighted_im, myopic_fish

ALGORITHMS = ("set-based", "node-based", "uniform", "greedy-im", "greedy-maximin", "myopic")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2
DEFAULT_SAMPLES = 100


@dataclass
class ExperimentConfig:
    """Declarative experiment description; every field can be set from JSON."""

    generator: dict | None = None
    edge_list: str | None = None
    weights: str | None = None
    undirected: bool = False
    lwcc: bool = False
    instance: str | None = None
    communities: str | None = None
    community_file: str | None = None
    community_order: str = "community-first"
    model: str = "ic"
    k: list = field(default_factory=lambda: [5])
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    T_opt: int | None = None
    T_eval: int | None = None
    hoeffding: bool = False
    epsilon: float = 0.1
    delta: float = 0.1
    sample_multiplier: float = 1.0
    eta: float = 0.1
    max_iterations: int = 2000
    iterations: int | None = None
    graphs: int = 1
    repetitions: int = 1
    seed: int = 0
    out: str = "results"
    threads: int = 1

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def validate(self):
        sources = [x is not None for x in (self.generator, self.edge_list, self.instance)]
        if sum(sources) != 1:
            raise ConfigError("exactly one of generator, edge_list, instance must be given")
        if not self.algorithms:
            raise ConfigError("algorithm list is empty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithm(s) {', '.join(bad)}; valid labels: {', '.join(ALGORITHMS)}")
        if not self.k or any(int(k) < 1 for k in self.k):
            raise ConfigError("k values must be positive integers")
        if self.repetitions < 1 or self.graphs < 1:
            raise ConfigError("repetitions and graphs must be >= 1")
        for name in ("T_opt", "T_eval"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        DiffusionModel(self.model)
        self.mw_config()
        self.estimator()
        return self

    def mw_config(self):
        return MWConfig(eta=self.eta, max_iterations=self.max_iterations, iterations=self.iterations)

    def estimator(self):
        return EstimatorParams(self.epsilon, self.delta, multiplier=self.sample_multiplier)

    def sample_sizes(self, n):
        """Explicit counts win; otherwise 100, or the Hoeffding count when enabled."""
        default = self.estimator().samples(n) if self.hoeffding else DEFAULT_SAMPLES
        T_opt = int(self.T_opt) if self.T_opt is not None else default
        T_eval = int(self.T_eval) if self.T_eval is not None else default
        return T_opt, T_eval


def _community_rule(cfg):
    if cfg.communities is not None:
        return cfg.communities
    planted = cfg.generator is not None and cfg.generator.get("kind") in ("block-stochastic", "core-periphery")
    return "planted" if planted else "singleton"


def resolve_instance(cfg: ExperimentConfig, graph_seed: int):
    """Graph and communities for one graph repetition."""
    communities = None
    if cfg.generator is not None:
        spec = GeneratorSpec.from_dict(cfg.generator).replace_seed(graph_seed)
        graph = generate_graph(spec)
        if _community_rule(cfg) == "planted":
            communities = planted_communities(spec)
    elif cfg.edge_list is not None:
        rule = WeightRule.parse(cfg.weights) if cfg.weights else default_weight_rule("real-world")
        graph = load_edge_list(cfg.edge_list, undirected=cfg.undirected, weights=rule,
                               seed=graph_seed, lwcc=cfg.lwcc)
    else:
        graph, communities = load_instance(cfg.instance)
    if cfg.community_file is not None:
        communities = load_communities(cfg.community_file, graph, order=cfg.community_order)
    elif communities is None or cfg.communities not in (None, "planted"):
        rule = _community_rule(cfg)
        if rule == "planted":
            raise ConfigError("planted communities need a generator or an instance carrying communities")
        communities = generate_communities(graph, CommunityRule.parse(rule), seed=derive_seed(graph_seed, 3))
    for k in cfg.k:
        if int(k) > graph.n:
            raise ConfigError(f"k={k} exceeds n={graph.n}")
    return graph, communities


def _out_dir(path):
    out = Path(path)
    if not out.is_dir():
        raise FileNotFoundError(f"output directory {out} does not exist")
    return out


def cmd_generate(cfg: ExperimentConfig):
    if cfg.generator is None:
        raise ConfigError("generate needs a generator spec")
    out = _out_dir(cfg.out)
    entries = []
    for i in range(cfg.graphs):
        graph_seed = cfg.seed + i
        graph, communities = resolve_instance(cfg, graph_seed)
        name = f"graph_{i}.json"
        save_instance(out / name, graph, communities)
        entries.append({"file": name, "seed": graph_seed, "n": graph.n, "arcs": graph.num_arcs, "m": communities.m})
    manifest = {"config": asdict(cfg), "graphs": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return entries


def _draw_seed(run_seed, k, label):
    return derive_seed(run_seed, 2, int(k), zlib.crc32(label.encode()))


def _solve_cell(cfg, graph, communities, graph_seed, rep, out):
    """All (k, algorithm) rows for one graph and one run repetition."""
    run_seed = derive_seed(graph_seed, rep)
    opt_seed, eval_seed = derive_seed(run_seed, 0), derive_seed(run_seed, 1)
    T_opt, T_eval = cfg.sample_sizes(graph.n)
    opt = sample_live_edges(graph, cfg.model, T_opt, opt_seed, threads=cfg.threads)
    ev = sample_live_edges(graph, cfg.model, T_eval, eval_seed, threads=cfg.threads)
    reports = []
    for k in cfg.k:
        k = int(k)
        mw = None
        mw_ms = 0.0
        for label in cfg.algorithms:
            t0 = time.perf_counter()
            if label in ("set-based", "node-based"):
                # both strategies come from one loop; each row reports its full cost
                extra = mw_ms
                if mw is None:
                    mw = run_multiplicative_weights(opt, communities, k, cfg.mw_config())
                    mw_ms = (time.perf_counter() - t0) * 1e3
                solver = solve_set_based if label == "set-based" else solve_node_based
                strategy = solver(opt, communities, k, state=mw)
            elif label == "uniform":
                strategy, extra = uniform_node_strategy(graph.n, k), 0.0
            elif label == "greedy-im":
                strategy, extra = frozenset(greedy_weighted_im(opt, np.ones(graph.n), k).order), 0.0
            elif label == "greedy-maximin":
                strategy, extra = greedy_maximin(opt, communities, k), 0.0
            else:
                strategy, extra = myopic_fish(opt, communities, k), 0.0
            runtime = (time.perf_counter() - t0) * 1e3 + extra
            draw = _draw_seed(run_seed, k, label)
            rep_ = evaluate_strategy(strategy, ev, communities, draw, algorithm=label, k=k,
                                     T_opt=T_opt, runtime_ms=runtime, graph_seed=graph_seed)
            rep_.seed = run_seed
            meta = {
                "algorithm": label, "model": DiffusionModel(cfg.model).short, "graph_seed": graph_seed,
                "run_seed": run_seed, "opt_seed": opt_seed, "eval_seed": eval_seed, "draw_seed": draw,
                "T_opt": T_opt, "T_eval": T_eval, "n": graph.n,
            }
            if mw is not None and label in ("set-based", "node-based"):
                meta["iterations"] = mw.iterations
            save_strategy(out / f"g{graph_seed}_r{rep}_k{k}_{label}.json", strategy, meta)
            reports.append(rep_)
    return reports


def _canonical(reports):
    order = {a: i for i, a in enumerate(ALGORITHMS)}
    return sorted(reports, key=lambda r: (r.graph_seed, r.k, order[r.algorithm], r.seed))


def cmd_solve(cfg: ExperimentConfig):
    out = _out_dir(cfg.out)
    strat_dir = out / "strategies"
    strat_dir.mkdir(exist_ok=True)
    reports = []
    for i in range(cfg.graphs):
        graph_seed = cfg.seed + i
        graph, communities = resolve_instance(cfg, graph_seed)
        for rep in range(cfg.repetitions):
            reports.extend(_solve_cell(cfg, graph, communities, graph_seed, rep, strat_dir))
    reports = _canonical(reports)
    with open(out / "results.csv", "w", newline="") as fh:
        write_csv(fh, reports)
    with open(out / "results.json", "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1)
        fh.write("\n")
    return reports


def cmd_evaluate(cfg: ExperimentConfig | None, strategy_path, instance_path=None, seed=None,
                 draw_seed=None, T_eval=None, model=None, out=None):
    """Re-evaluate a saved strategy; sample settings default to those recorded with it."""
    strategy, meta = load_strategy(strategy_path, with_meta=True)
    if instance_path is not None:
        graph, communities = load_instance(instance_path)
        if communities is None:
            communities = CommunityStructure.singletons(graph.n)
        graph_seed = meta.get("graph_seed")
    elif cfg is not None:
        graph_seed = meta.get("graph_seed", cfg.seed)
        graph, communities = resolve_instance(cfg, graph_seed)
    else:
        raise ConfigError("evaluate needs --instance or --config")
    n_strat = meta.get("n", getattr(strategy, "n", None))
    if isinstance(strategy, frozenset):
        n_strat = meta.get("n")
        if strategy and max(strategy) >= graph.n:
            raise ConfigError(f"strategy seeds exceed instance size n={graph.n}")
    if n_strat is not None and int(n_strat) != graph.n:
        raise ConfigError(f"strategy has n={n_strat} but instance has n={graph.n}")
    model = model or meta.get("model") or (cfg.model if cfg else "ic")
    seed = seed if seed is not None else meta.get("eval_seed", 0)
    if T_eval is None:
        T_eval = meta.get("T_eval") or (cfg.sample_sizes(graph.n)[1] if cfg else 1000)
    draw_seed = draw_seed if draw_seed is not None else meta.get("draw_seed", seed)
    ev = sample_live_edges(graph, model, int(T_eval), int(seed))
    t0 = time.perf_counter()
    report = evaluate_strategy(strategy, ev, communities, int(draw_seed), algorithm=meta.get("algorithm", "file"),
                               T_opt=meta.get("T_opt", 0), graph_seed=graph_seed)
    report.runtime_ms = (time.perf_counter() - t0) * 1e3
    report.seed = int(meta.get("run_seed", seed))
    if out is None:
        write_csv(sys.stdout, [report])
    else:
        with open(out, "w", newline="") as fh:
            write_csv(fh, [report])
    return report


# ---------------------------------------------------------------------------
# argument handling


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _str_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="fairim", description="Fair influence maximization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="master seed (evaluate: evaluation-sample seed)")
        sp.add_argument("--out", help="output directory (evaluate: CSV file)")
        sp.add_argument("--model", choices=["ic", "lt"])
        sp.add_argument("--t-eval", type=int, dest="T_eval")
        sp.add_argument("--edge-list", dest="edge_list")
        sp.add_argument("--weights", help="weight rule, e.g. uniform:0,0.2 or constant:0.05")
        sp.add_argument("--undirected", action="store_true", default=None)
        sp.add_argument("--lwcc", action="store_true", default=None)
        sp.add_argument("--communities", help="singleton | planted | bfs:M | random-imbalanced")
        sp.add_argument("--graphs", type=int)
        sp.add_argument("--threads", type=int)

    g = sub.add_parser("generate", help="write generated instances to disk")
    common(g)

    s = sub.add_parser("solve", help="run algorithms and write strategies plus results.csv")
    common(s)
    s.add_argument("--algos", type=_str_list, dest="algorithms")
    s.add_argument("--k", type=_int_list)
    s.add_argument("--hoeffding", action="store_true", default=None,
                   help="size samples from --eps/--delta instead of the default 100")
    s.add_argument("--eps", type=float, dest="epsilon", help="implies --hoeffding")
    s.add_argument("--delta", type=float, help="implies --hoeffding")
    s.add_argument("--sample-multiplier", type=float, dest="sample_multiplier")
    s.add_argument("--eta", type=float)
    s.add_argument("--max-iters", type=int, dest="max_iterations")
    s.add_argument("--iterations", type=int)
    s.add_argument("--t-opt", type=int, dest="T_opt")
    s.add_argument("--repetitions", type=int)

    e = sub.add_parser("evaluate", help="re-evaluate a saved strategy")
    common(e)
    e.add_argument("--strategy", required=True)
    e.add_argument("--instance", help="instance JSON (graph plus communities)")
    e.add_argument("--draw-seed", type=int, dest="draw_seed")
    return p


_OVERRIDES = ("seed", "out", "model", "T_eval", "edge_list", "weights", "undirected", "lwcc", "communities",
              "graphs", "threads", "algorithms", "k", "epsilon", "delta", "sample_multiplier", "eta",
              "max_iterations", "iterations", "T_opt", "repetitions", "hoeffding")


def load_config(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_dict(d)


def config_from_args(args, skip=()):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for name in _OVERRIDES:
        v = None if name in skip else getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "epsilon", None) is not None or getattr(args, "delta", None) is not None:
        cfg.hoeffding = True
    return cfg


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "evaluate":
        cfg = None
        if args.config or args.edge_list:
            # --seed and --out mean the evaluation seed and CSV path here
            cfg = config_from_args(args, skip=("seed", "out"))
        return cmd_evaluate(cfg, args.strategy, args.instance, seed=args.seed, draw_seed=args.draw_seed,
                            T_eval=args.T_eval, model=args.model, out=args.out)
    cfg = config_from_args(args).validate()
    if args.command == "generate":
        return cmd_generate(cfg)
    return cmd_solve(cfg)


def main(argv=None):
    try:
        run(argv)
    except (FairIMError, ValueError, KeyError, TypeError) as exc:
        print(f"fairim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fairim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
