"""Adaptive Pareto active learning with Gaussian process surrogates.

The package identifies the epsilon-accurate Pareto set of an expensive
vector-valued function over a continuous design space.  It maintains a
tree-based partition of the space, keeps high-probability confidence
rectangles on the objective values of each cell, and alternates
discarding, covering, refinement, and evaluation until every remaining
cell is guaranteed epsilon-close to the Pareto front.
"""

from .bench import (
    MetricsReport,
    SampledObjective,
    avg_mse,
    compute_metrics,
    eps_accuracy,
    eps_coverage,
    hv_curve,
    make_oracle,
    predicted_front_from_result,
    reference_point,
    sample_gp_function,
    true_pareto_front,
)
from .confidence import HyperRect, NodeBelief, diameter, intersect, node_indices
from .engine import (
    EngineConfig,
    RunResult,
    Schedules,
    TraceRow,
    beta,
    compute_h_max,
    eval_cap,
    make_schedules,
    run,
    sample_complexity_bounds,
    v_h,
)
from .errors import ConfigError, DomainError, InputError, NumericalError
from .gp import GPPosterior, Prediction, cholesky_with_jitter, prior_gram
from .kernels import (
    MATERN52,
    SQUARED_EXPONENTIAL,
    MultiOutputKernel,
    ScalarKernel,
    SmoothnessConstants,
    eval_matrix,
    eval_scalar,
    prior_variances,
    scalar_gram,
    smoothness_constants,
)
from .pareto import (
    ParetoFront,
    eps_dominated,
    eps_pareto_front_membership,
    hypervolume,
    hypervolume_mc,
    nondominated_set,
    pessimistic_pareto,
    weakly_dominated,
)
from .partition import (
    DesignSpace,
    Node,
    PartitionParams,
    cell_radius,
    children,
    covering_number_bound,
    default_partition_params,
    root,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DesignSpace",
    "DomainError",
    "EngineConfig",
    "GPPosterior",
    "HyperRect",
    "InputError",
    "MATERN52",
    "MetricsReport",
    "MultiOutputKernel",
    "Node",
    "NodeBelief",
    "NumericalError",
    "ParetoFront",
    "PartitionParams",
    "Prediction",
    "RunResult",
    "SQUARED_EXPONENTIAL",
    "SampledObjective",
    "ScalarKernel",
    "Schedules",
    "SmoothnessConstants",
    "TraceRow",
    "avg_mse",
    "beta",
    "cell_radius",
    "children",
    "cholesky_with_jitter",
    "compute_h_max",
    "compute_metrics",
    "covering_number_bound",
    "default_partition_params",
    "diameter",
    "eps_accuracy",
    "eps_coverage",
    "eps_dominated",
    "eps_pareto_front_membership",
    "eval_cap",
    "eval_matrix",
    "eval_scalar",
    "hv_curve",
    "hypervolume",
    "hypervolume_mc",
    "intersect",
    "make_oracle",
    "make_schedules",
    "node_indices",
    "nondominated_set",
    "pessimistic_pareto",
    "predicted_front_from_result",
    "prior_gram",
    "prior_variances",
    "reference_point",
    "root",
    "run",
    "sample_complexity_bounds",
    "sample_gp_function",
    "scalar_gram",
    "smoothness_constants",
    "true_pareto_front",
    "v_h",
    "weakly_dominated",
]
