"""dbsim: deterministic simulator of drone base stations serving mobile users."""

__version__ = "0.1.0"

from .engine import ConfigError, SimConfig, run, run_batch
from .metrics import MetricsLog

__all__ = [
    "ConfigError",
    "MetricsLog",
    "SimConfig",
    "run",
    "run_batch",
    "__version__",
]
