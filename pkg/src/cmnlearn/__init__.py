"""cmnlearn: contextual Markov network structure learning on discrete data.

The library learns an undirected graph together with per-edge contexts
(common-neighbor configurations that switch an edge off) by maximizing a
marginal pseudo-likelihood score, fits constrained log-linear parameters by
exact maximum likelihood, and evaluates models by standardized BIC, held-out
predictive accuracy, and KL divergence to a known generator.
"""

from .data import (DEFAULT_TABLE_CAP, Dataset, FoldPlan, JointTable,
                   empirical_joint, load_csv, make_folds, sample_joint)
from .errors import (CapacityError, CmnError, DataParseError, FitError,
                     FormatError, StructureError)
from .evaluate import (CrossValidationResult, ExperimentReport,
                       cross_validated_accuracy, experiment_report, kl_divergence)
from .model import (BlanketPartition, ContextualStructure, EdgeContext,
                    UndirectedGraph, ValidationReport, build_blanket_partition,
                    common_neighbors, neighbors_graphs, render_labeled_graph,
                    structure_from_json_dict, structure_to_json_dict,
                    validate_structure)
from .params import (ConstraintSystem, FeatureIndex, LogLinearModel,
                     LogLinearProblem, build_model, complete_subsets,
                     constraint_system, fit_mle, joint_of, model_dimension,
                     null_space_basis)
from .scoring import (ClassCounts, MplScorer, ScoreConfig, ScoredModel,
                      class_counts, local_log_mpl, log_context_prior, log_mpl,
                      sbic, total_score)
from .search import (SweepResult, context_hill_climb, default_kappa_grid,
                     graph_hill_climb, kappa_sweep)

__version__ = "0.1.0"

__all__ = [
    "BlanketPartition", "CapacityError", "ClassCounts", "CmnError",
    "ConstraintSystem", "ContextualStructure", "CrossValidationResult",
    "DEFAULT_TABLE_CAP", "DataParseError", "Dataset", "EdgeContext",
    "ExperimentReport", "FeatureIndex", "FitError", "FoldPlan", "FormatError",
    "JointTable", "LogLinearModel", "LogLinearProblem", "MplScorer",
    "ScoreConfig", "ScoredModel", "StructureError", "SweepResult",
    "UndirectedGraph", "ValidationReport", "build_blanket_partition",
    "build_model", "class_counts", "common_neighbors", "complete_subsets",
    "constraint_system", "context_hill_climb", "cross_validated_accuracy",
    "default_kappa_grid", "empirical_joint", "experiment_report", "fit_mle",
    "graph_hill_climb", "joint_of", "kappa_sweep", "kl_divergence",
    "load_csv", "local_log_mpl", "log_context_prior", "log_mpl", "make_folds",
    "model_dimension", "neighbors_graphs", "null_space_basis",
    "render_labeled_graph", "sample_joint", "sbic", "structure_from_json_dict",
    "structure_to_json_dict", "total_score", "validate_structure",
]
