"""Online item screening under exact per-property cardinality constraints.

Items arrive one at a time from an i.i.d. source and must be retained or
discarded irrevocably; the goal is to keep few items while the best feasible
selection among the retained ones matches the full-stream optimum.
"""

from .core import (
    ConfigError,
    ConstraintSpec,
    DistributionSpec,
    InputError,
    Instance,
    Item,
    Violation,
    derive_seed,
    dummy_items,
    is_dummy_id,
    read_constraint_spec,
    read_distribution_spec,
    read_instance,
    sample_instance,
    validate_instance,
    validate_items,
    write_constraint_spec,
    write_distribution_spec,
    write_instance,
)
from .matching import (
    OversizeError,
    Solution,
    brute_force_matching,
    exact_solution_value,
    optimal_matching,
)
from .greedy import GreedyResult, TraceStep, greedy_screen, warmup_length
from .thresholds import (
    ABOVE,
    NetSizeError,
    RetentionStats,
    ThresholdsPolicy,
    apply_policy,
    is_above,
    learn_optimal_thresholds,
    learn_topm_thresholds,
    quantile_policy_net,
    read_policy,
    retention_slack,
    screen_with_policy,
    value_slack,
    write_policy,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .experiments import (
    Aggregates,
    ConcentrationStats,
    ConvergenceStats,
    ExperimentConfig,
    TrialRecord,
    TrialStats,
    concentration_experiment,
    convergence_experiment,
    lower_bound_distribution,
    run_trials,
)

__version__ = "0.1.0"

__all__ = [
    "ABOVE",
    "Aggregates",
    "ConcentrationStats",
    "ConfigError",
    "ConstraintSpec",
    "ConvergenceStats",
    "DistributionSpec",
    "ExperimentConfig",
    "GreedyResult",
    "InputError",
    "Instance",
    "Item",
    "NetSizeError",
    "OversizeError",
    "PipelineConfig",
    "PipelineResult",
    "RetentionStats",
    "Solution",
    "ThresholdsPolicy",
    "TraceStep",
    "TrialRecord",
    "TrialStats",
    "Violation",
    "apply_policy",
    "brute_force_matching",
    "concentration_experiment",
    "convergence_experiment",
    "derive_seed",
    "dummy_items",
    "exact_solution_value",
    "greedy_screen",
    "is_above",
    "is_dummy_id",
    "learn_optimal_thresholds",
    "learn_topm_thresholds",
    "lower_bound_distribution",
    "optimal_matching",
    "quantile_policy_net",
    "read_constraint_spec",
    "read_distribution_spec",
    "read_instance",
    "read_policy",
    "retention_slack",
    "run_pipeline",
    "run_trials",
    "sample_instance",
    "screen_with_policy",
    "validate_instance",
    "validate_items",
    "value_slack",
    "warmup_length",
    "write_constraint_spec",
    "write_distribution_spec",
    "write_instance",
    "write_policy",
]
