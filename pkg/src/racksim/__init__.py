"""racksim: a discrete-event simulator of a rack-scale computer whose
top-of-rack switch performs per-request inter-server scheduling and whose
servers run preemptive intra-server schedulers.

All simulated times are microseconds (floats). Runs are deterministic given
(config, seed).
"""

__version__ = "0.1.0"

from .engine import EventLoop, RngStreams, SimulationError
from .analysis import (MetricsRecord, insensitivity_check, jsq_equilibrium,
                       mm1_sojourn_mean, quantile)

__all__ = [
    "EventLoop",
    "RngStreams",
    "SimulationError",
    "MetricsRecord",
    "insensitivity_check",
    "jsq_equilibrium",
    "mm1_sojourn_mean",
    "quantile",
    "__version__",
]
