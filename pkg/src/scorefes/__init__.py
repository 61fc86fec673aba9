"""Score-based density estimation and unbiasing of accelerated sampling.

Estimates the density of collective-variable ensembles with a
variance-exploding diffusion model (plus kernel-density and Gaussian-mixture
baselines), then reweights high-temperature samples into equilibrium
free-energy surfaces.  Works on flat R^n and on the hypertorus T^n.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    DegenerateData,
    DegenerateWeights,
    EmptyDataset,
    InvalidFeature,
    InvalidInput,
    NonFiniteLoss,
    NumericalFailure,
    ScorefesError,
)
from .spaces import Space, WrappedNormalParams, euclidean, torus, wrap

__all__ = [
    "ConfigError",
    "DataError",
    "DegenerateData",
    "DegenerateWeights",
    "EmptyDataset",
    "InvalidFeature",
    "InvalidInput",
    "NonFiniteLoss",
    "NumericalFailure",
    "ScorefesError",
    "Space",
    "WrappedNormalParams",
    "euclidean",
    "torus",
    "wrap",
    "__version__",
]
