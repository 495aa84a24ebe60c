"""Structure learning for k-spin Ising models on hypergraphs.

The package recovers which groups of k spins interact (and the signs of
those interactions) from observed +-1 configurations, by running one
l1-regularized logistic regression per vertex on products of the other
spins and merging the per-vertex neighborhoods into a hyperedge set.
Exact small-system oracles, Gibbs/exact samplers, assumption diagnostics,
synthetic generators, and a scaling-experiment harness round it out.
"""

from __future__ import annotations

from .diagnostics import (DiagnosticsReport, FisherBlocks, ProbeTable,
                          concentration_probe, dependency_constants,
                          diagnose_node, eta, incoherence, population_fisher,
                          sample_fisher_blocks, score_sup,
                          uniqueness_certificate)
from .errors import (CapacityError, DiagnosticError, DimensionError,
                     EmptyResultError, GenerationError, HyperIsingError,
                     ParseError, SolverError)
from .generate import (CoefficientScheme, HypergraphSupport, assign_coefficients,
                       binarize_series, read_edge_list, read_series_csv,
                       regular_hypergraph, scaling_n, triangles_from_graph)
from .recovery import (AggregationRule, NodeNeighborhood, RecoveryReport,
                       SignedSupport, aggregate, fit_node, format_coefficients,
                       recovery_rate, run_pipeline, success)
from .regression import (BicScore, BicSelection, NodeDesign, SolveInfo,
                         SolveOptions, SparseCoefVector, bic_select,
                         kkt_residual, lambda_practice, lambda_theory,
                         node_coefficients, pseudo_grad, pseudo_loss, solve_l1)
from .sampler import (GibbsConfig, SampleMatrix, draw_samples, exact_sample,
                      gibbs_sweep, load_samples_csv, save_samples_csv)
from .sweep import SweepConfig, SweepResult, TrialRow, run_sweep
from .tensor import (ENUMERATION_CAP, ExactDistribution, InteractionTensor,
                     conditional_prob, degrees, exact_distribution,
                     exact_moment, hamiltonian, load_tensor, local_field,
                     save_tensor)

__version__ = "0.1.0"

__all__ = [
    "AggregationRule", "BicScore", "BicSelection", "CapacityError",
    "CoefficientScheme", "DiagnosticError", "DiagnosticsReport",
    "DimensionError", "ENUMERATION_CAP", "EmptyResultError",
    "ExactDistribution", "FisherBlocks", "GenerationError", "GibbsConfig",
    "HyperIsingError", "HypergraphSupport", "InteractionTensor",
    "NodeDesign", "NodeNeighborhood", "ParseError", "ProbeTable",
    "RecoveryReport", "SampleMatrix", "SignedSupport", "SolveInfo",
    "SolveOptions", "SolverError", "SparseCoefVector", "SweepConfig",
    "SweepResult", "TrialRow", "aggregate", "assign_coefficients",
    "bic_select", "binarize_series", "concentration_probe",
    "conditional_prob", "degrees", "dependency_constants", "diagnose_node",
    "draw_samples", "eta", "exact_distribution", "exact_moment",
    "exact_sample", "fit_node", "format_coefficients", "gibbs_sweep",
    "hamiltonian", "incoherence", "kkt_residual", "lambda_practice",
    "lambda_theory", "load_samples_csv", "load_tensor", "local_field",
    "node_coefficients", "population_fisher", "pseudo_grad", "pseudo_loss",
    "read_edge_list", "read_series_csv", "recovery_rate",
    "regular_hypergraph", "run_pipeline", "run_sweep", "sample_fisher_blocks",
    "save_samples_csv", "save_tensor", "scaling_n", "score_sup", "solve_l1",
    "success", "triangles_from_graph", "uniqueness_certificate",
]
