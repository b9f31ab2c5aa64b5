"""Numerical laboratory for block-code random Schrodinger operators."""

from .errors import BlocklocError, ConfigError, NumericalError, PropertyViolation
from .model import (
    BlockCode,
    FreezeScheme,
    PotentialModel,
    Realization,
    SingleSiteDistribution,
    bernoulli_anderson,
    check_support_condition,
    conditional_support,
    difference_model,
    freeze_sample,
    model_from_dict,
    sample_realization,
    support_of_potential_vector,
)

__all__ = [
    "BlocklocError", "ConfigError", "NumericalError", "PropertyViolation",
    "BlockCode", "FreezeScheme", "PotentialModel", "Realization",
    "SingleSiteDistribution", "bernoulli_anderson", "check_support_condition",
    "conditional_support", "difference_model", "freeze_sample",
    "model_from_dict", "sample_realization", "support_of_potential_vector",
]
