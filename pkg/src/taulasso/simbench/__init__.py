"""Simulation scenarios, metrics and experiment drivers."""
from .experiments import (
    DEFAULT_TRIALS,
    FULL_TRIALS,
    ExperimentReport,
    overshrink_grid,
    parse_ystar,
    run_breakdown_curve,
    run_if_validation,
    run_overshrinkage,
    run_table_experiment,
    trial_seeds,
)
from .metrics import METRICS, MetricsRecord, score, support_counts
from .scenarios import (
    ERROR_LAWS,
    OVERSHRINK,
    OVERLAP_MODES,
    SCENARIOS,
    TOY_1D,
    BadLeveragePlan,
    ContaminationPlan,
    GrossPlan,
    LeverageBlock,
    ScenarioSpec,
    generate,
    noise_sd,
    scenario,
)
