"""recgraph: synchronous value recursions on directed random graphs, their
branching-tree limits, and the diagnostics connecting the two."""

from .bounds import (BoundInputs, ContractionEstimate, contraction_estimate,
                     coupling_error_bound, estimate_bound_inputs,
                     graph_moment_bound, moment_bound, perturbation_weight)
from .distances import (EmpiricalDist, fit_log_slope, wasserstein_decay_trace,
                        wasserstein_p)
from .dynamics import (ContractionPreconditionError, EdgeMatrixSummary,
                       GraphState, coupled_contraction_run,
                       edge_matrix_summary, initial_state, iterate,
                       marginal_at, step, trajectory_summary_rows,
                       trajectory_to_csv)
from .graphs import (DegreeSequence, DiGraph, GraphGenError, IrdSpec,
                     PairingAttemptsExceeded, RootedNeighborhood,
                     complete_digraph, explore_in_neighborhood, generate_dcm,
                     generate_ird, iid_degree_sequence, tree_likeness_rate)
from .laws import Law, LawError, bernoulli, choice, constant, draw_initial
from .laws import exponential, geometric, normal, poisson, uniform
from .marks import MarkBatch, VertexMark
from .models import (BoundedSupportBound, HolderConstants, MatrixNormBound,
                     ModelConfigError, ModelEvaluationError, RecursionModel,
                     lipschitz_audit, model_cascade, model_degroot,
                     model_from_config, model_pagerank, model_voter,
                     sample_attrs)
from .trees import (FixedPointDiagnostics, GWTreeSpec, MarkedTree, NodeLaw,
                    NonContractionError, PopulationExplosionError, SamplePool,
                    TreeSizeError, fixed_point_solve, population_dynamics,
                    sample_tree, spec_explicit, spec_from_degree_sequence,
                    spec_from_ird, spec_from_joint_degree_law, spec_from_json,
                    spec_regular, tree_recursion)

__version__ = "0.1.0"
