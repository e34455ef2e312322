"""Fair influence maximization with node-based and set-based random seeding."""
from .diffusion import (
    DiffusionModel,
    EstimatorParams,
    ExactDiffusion,
    LiveEdgeSample,
    community_value,
    exact_sigma_bruteforce,
    required_samples,
    sample_live_edges,
)
from .errors import ConfigError, FairIMError, ModelError, ParameterError, ParseError, SizeError
from .evaluation import EvaluationReport, PoFReport, bruteforce_opt_node, bruteforce_opt_set, empirical_pof, evaluate_strategy
from .fair_solvers import (
    MWConfig,
    NodeStrategy,
    SetStrategy,
    solve_node_based,
    solve_set_based,
    uniform_node_strategy,
)
from .graph_core import CommunityStructure, DirectedWeightedGraph, GeneratorSpec, WeightRule, generate_graph
from .oracle_greedy import greedy_maximin, greedy_weighted_im, myopic_fish, weights_from_community_duals

__version__ = "0.1.0"
