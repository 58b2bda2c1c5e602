"""Data-adaptive neighbourhood graph estimation for areal count data.

Estimates which pairs of areal units should be treated as spatial
neighbours by deleting edges from a border-sharing adjacency graph so as
to maximise a profiled pseudo-likelihood of the units' residual surface,
and ships the surrounding pipeline: residual estimation, a synthetic panel
generator with known truth, a Gaussian random-field smoother for scoring
the estimated graph against the border-sharing one, and a CLI.
"""

__version__ = "0.1.0"

from .graph import (
    FeasibleSubgraph,
    Graph,
    connected_components,
    lattice_graph,
)
from .objective import (
    CarHyperparams,
    ObjectiveValue,
    adjusted_contribution,
    contribution,
    neighbourhood_discrepancy,
    objective,
    objective_at_tau,
    partial_correlation,
    tau_mle,
    weighted_discrepancy_sum,
)
from .residuals import (
    CountPanel,
    GlmFit,
    fit_poisson_glm,
    fitted_fixed_effects,
    raw_residuals,
    temporal_average,
)
from .search import (
    SearchConfig,
    SearchTrace,
    backend_name,
    best_subset_score,
    brute_force_optimum,
    local_search,
)
from .simulate import (
    SimulatedPanel,
    SimulationConfig,
    ar1_series,
    calibrate_range,
    exponential_correlation,
    replicate_stream,
    sample_mvn,
    simulate_panel,
    step_change_mean,
)
from .smoothing import (
    EvalReport,
    SmootherGrid,
    SmoothResult,
    evaluate_replicate,
    evaluate_replicate_surfaces,
    leroux_precision,
    smooth_residuals,
)

__all__ = [
    "__version__",
    "Graph",
    "FeasibleSubgraph",
    "lattice_graph",
    "connected_components",
    "ObjectiveValue",
    "CarHyperparams",
    "neighbourhood_discrepancy",
    "weighted_discrepancy_sum",
    "objective",
    "objective_at_tau",
    "tau_mle",
    "contribution",
    "adjusted_contribution",
    "partial_correlation",
    "SearchConfig",
    "SearchTrace",
    "backend_name",
    "local_search",
    "brute_force_optimum",
    "best_subset_score",
    "CountPanel",
    "GlmFit",
    "fit_poisson_glm",
    "raw_residuals",
    "fitted_fixed_effects",
    "temporal_average",
    "SimulationConfig",
    "SimulatedPanel",
    "simulate_panel",
    "exponential_correlation",
    "calibrate_range",
    "sample_mvn",
    "step_change_mean",
    "ar1_series",
    "replicate_stream",
    "SmootherGrid",
    "SmoothResult",
    "EvalReport",
    "leroux_precision",
    "smooth_residuals",
    "evaluate_replicate",
    "evaluate_replicate_surfaces",
]
