"""Two-parameter Poisson-Dirichlet partitions: samplers, exact laws,
posterior Binomial-Beta representation and moderate-deviation diagnostics."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import DomainError, NumericGuardError, ResourceError
from .sampler import ModelParams, PartitionState, RngStream

__all__ = [
    "BACKEND",
    "DomainError",
    "ModelParams",
    "NumericGuardError",
    "PartitionState",
    "ResourceError",
    "RngStream",
    "__version__",
]
