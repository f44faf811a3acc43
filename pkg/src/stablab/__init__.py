"""Monte Carlo laboratory for symmetric α-stable processes: small deviation
rates, LePage series and random-partition diagonal operators."""
from .errors import BudgetError, ConfigError
from .kernels import BACKEND
from .rng import RngSpec

__version__ = "0.1.0"
__all__ = ["RngSpec", "BACKEND", "ConfigError", "BudgetError", "__version__"]
