"""k-independent site percolation on rooted trees: exact Shearer-measure
computations, tree-fission models, Monte Carlo exploration and moment bounds."""

__version__ = "0.1.0"

from .errors import (ConditioningError, ConstructionError, DomainError, PercolationError,
                     ResourceError)
from .trees import (Cutset, FiniteGraph, FlowAssignment, RootedTree, TreeSpec, branching_number,
                    build_tree, confluent, cutset_sum, k_fuzz, kfuzz_path, lambda_flow)
from .shearer import (b_sequence, critical_function, curve_fk, curve_gk, curve_hk,
                      minoration_fk, p_shearer_graph, p_shearer_kfuzz, p_shearer_line,
                      shearer_conditional, shearer_event_prob, xi)
from .line import (LineLaw, allones_prob, make_law, next_bit_prob, pattern_prob, prefix_prob,
                   sample_prefix)
from .fission import (PercolationModel, exact_kernel, exact_path_prob, exact_reach,
                      fission_sample, make_model)
from .engine import cluster_diameter_stats, reach_curve, simulate_reach
from .lab import (critical_values, figure_data, first_moment_bound, kernel_bound_audit,
                  minimality_audit, second_moment_bound)
