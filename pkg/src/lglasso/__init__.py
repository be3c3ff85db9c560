"""Latent group Lasso: a norm for sparsity patterns that are unions of overlapping groups."""
from .analysis import ConsistencyReport, consistency_conditions, recovery_error, selection_frequency
from .exceptions import (
    CoverViolation,
    DegenerateDesign,
    DuplicateGroup,
    GridMismatch,
    GroupSetError,
    Infeasible,
    LatentGroupLassoError,
    NonpositiveWeight,
    NotConverged,
    SingularCovariance,
    TopologyMismatch,
    UncoveredCovariate,
    UncoveredMass,
)
from .groups import (
    GroupSet,
    WeightScheme,
    apply_weight_scheme,
    build_group_set,
    check_condition_C,
    domination_threshold_singletons,
    domination_value_P,
    groups_from_chain_windows,
    groups_from_chain_windows_upto,
    groups_from_edges,
    groups_from_overlapping_chain,
    is_redundant_sufficient,
    load_group_set,
    save_group_set,
)
from .losses import Loss
from .norm import (
    GroupSupport,
    NormResult,
    canonical_decomposition,
    decomposition_from_lambda,
    group_support,
    is_decomposition_unique,
    omega,
    omega_dual,
    omega_oracle,
)
from .solver import FitResult, PathResult, duplicate_design, fit, kkt_check, lambda_max, path, prox
from .synth import (
    ExperimentReport,
    SynthSpec,
    abs_sum_event_probability,
    generate,
    run_recovery_experiment,
    run_weight_experiment,
)

__version__ = "0.1.0"
