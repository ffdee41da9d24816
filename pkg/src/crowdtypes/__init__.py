"""Crowdsourced binary labeling under the d-type specialization model.

Workers and tasks carry hidden types; a worker answers a matched-type
task correctly with probability p and any other task with probability q
(1/2 <= q < p <= 1).  The package simulates the model, clusters workers
from a shared probe block (threshold or SDP based), estimates the
reliability parameters, aggregates answers by weighted majority voting,
and evaluates everything against closed-form query-budget formulas.
"""

from ._version import __version__
from .budgets import (
    BudgetReport,
    StageOneRecommendation,
    budget_report,
    gamma_matched,
    gamma_unmatched,
    stage1_recommendation,
    theoretical_error_bounds,
)
from .clustering import (
    Clustering,
    ProbeBlock,
    ThresholdWorkerClusterer,
    agreement_fraction,
    agreement_matrix,
    cluster_sequential,
    partition_equal,
    probe_block_from_answers,
)
from .errors import (
    CrowdTypesError,
    EstimationFailureError,
    InsufficientClusterError,
    InvalidAssignmentError,
    InvalidParameterError,
    InvalidWeightsError,
    NoVotesError,
    NumericalFailureError,
    ShapeError,
)
from .harness import ExperimentConfig, SweepRow, emit_csv, run_sweep, summarize, write_meta
from .inference import (
    ALGORITHMS,
    BudgetKnobs,
    ExperimentResult,
    ReliabilityEstimates,
    WorkerSplit,
    estimate_pq,
    infer_alg1,
    infer_alg2,
    infer_prior_alg,
    run_pipeline,
    split_workers,
    type_match,
)
from .model import (
    AnswerMatrix,
    AssignmentPlan,
    ModelParams,
    World,
    agreement_probabilities,
    assign_budgeted,
    assign_per_cluster,
    assign_uniform,
    load_answer_matrix,
    load_world,
    pairwise_product_rates,
    sample_answers,
    sample_world,
    save_answer_matrix,
    save_world,
)
from .rng import derive_seed, substream
from .sdp import (
    EdgeDensityEstimates,
    SdpSolution,
    SdpSolverConfig,
    SdpWorkerClusterer,
    cluster_workers_sdp,
    consistency_probe_tasks,
    density_constants,
    estimate_edge_densities,
    extract_clusters_kmedoids,
    jacobi_eigh,
    similarity_matrix,
    solve_sdp,
    top_two_eigenvalues,
    tuning_window,
)
from .voting import (
    VoteOutcome,
    hoeffding_bound,
    majority_vote,
    oracle_weights,
    weighted_majority_vote,
    wmv_exponent,
)
