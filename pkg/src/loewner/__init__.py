"""Certified multivariate operator inequalities on finite-dimensional Hermitian matrices."""
from .errors import (
    DomainError,
    FitError,
    LoewnerError,
    NonCommutingError,
    NonHermitianError,
    PreconditionError,
)
from .spectral import *  # noqa: F401,F403
from .envelope import *  # noqa: F401,F403
from .optimize import *  # noqa: F401,F403
from .opmaps import *  # noqa: F401,F403
from .bounds import *  # noqa: F401,F403
from .wbound import *  # noqa: F401,F403
from .tails import *  # noqa: F401,F403
from . import bounds, envelope, opmaps, optimize, spectral, tails, wbound

__version__ = "0.1.0"

__all__ = (
    ["LoewnerError", "DomainError", "PreconditionError", "NonHermitianError",
     "NonCommutingError", "FitError", "__version__"]
    + spectral.__all__ + envelope.__all__ + optimize.__all__ + opmaps.__all__
    + bounds.__all__ + wbound.__all__ + tails.__all__
)
