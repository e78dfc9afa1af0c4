"""Density estimation over the {-1,+1}^n binary hypercube.

Walsh-spectrum shrinkage estimators, monotone-transformed kernels,
weighted product-form categorical kernels, mixtures, and leave-one-out
cross-validation, with element-level evaluation that never allocates a
2^n buffer unless explicitly asked to.
"""

from .backend import ACTIVE_BACKEND, HAS_NUMBA
from .cv import (
    LOSSES,
    RiskReport,
    SearchSpace,
    coordinate_descent_w,
    evaluate_space,
    grid_search,
    kl_risk,
    loo_term,
    se_risk,
)
from .errors import (
    BindensError,
    BudgetExceededError,
    CapacityError,
    ConfigError,
    DataError,
    DegenerateNormalizerError,
    InsufficientDataError,
    NumericError,
    TransformOverflowError,
)
from .estimators import (
    MAX_FULL_N,
    VARIANTS,
    CountsVector,
    DensityEstimate,
    EstimatorConfig,
    clamp_and_renormalize,
    counts_from_observations,
    element_linear,
    element_mixture,
    element_transformed,
    element_waak,
    estimate_at,
    estimate_full,
    matrix_element,
    shrinkage_optimal,
    squared_element_general,
    squared_element_linear,
    squared_element_waak,
    squared_matrix_element,
)
from .shrinkage import ShrinkageSpec
from .transforms import KINDS, NormalizerResult, Transform, apply, normalizer
from .walsh import (
    MAX_DENSE_N,
    InteractionIndexSet,
    as_point,
    fwht,
    index_of_point,
    interaction_indexes,
    point_of_index,
    product_index,
    walsh_entry,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "HAS_NUMBA",
    "KINDS",
    "LOSSES",
    "MAX_DENSE_N",
    "MAX_FULL_N",
    "VARIANTS",
    "BindensError",
    "BudgetExceededError",
    "CapacityError",
    "ConfigError",
    "CountsVector",
    "DataError",
    "DegenerateNormalizerError",
    "DensityEstimate",
    "EstimatorConfig",
    "InsufficientDataError",
    "InteractionIndexSet",
    "NormalizerResult",
    "NumericError",
    "RiskReport",
    "SearchSpace",
    "ShrinkageSpec",
    "Transform",
    "TransformOverflowError",
    "apply",
    "as_point",
    "clamp_and_renormalize",
    "coordinate_descent_w",
    "counts_from_observations",
    "element_linear",
    "element_mixture",
    "element_transformed",
    "element_waak",
    "estimate_at",
    "estimate_full",
    "evaluate_space",
    "fwht",
    "grid_search",
    "index_of_point",
    "interaction_indexes",
    "kl_risk",
    "loo_term",
    "matrix_element",
    "normalizer",
    "point_of_index",
    "product_index",
    "se_risk",
    "shrinkage_optimal",
    "squared_element_general",
    "squared_element_linear",
    "squared_element_waak",
    "squared_matrix_element",
    "walsh_entry",
]
