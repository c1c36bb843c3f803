"""Heavy-tailed GI/GI/s FCFS queues: simulation, asymptotics, validation."""

from .asymp import Kind, Prediction, classify_regime
from .dist import (Deterministic, Exponential, IntegratedTail, Lognormal, Pareto,
                   WeibullTail)
from .errors import (ArgumentOrder, ConfigError, CouplingViolation, HeavyQError,
                     InsufficientSamples, MajorantViolation, NonConvergent,
                     NonIntegrableTail, QuadratureFailure, RegimeError, UnstableError)
from .kw import QueueConfig, kw_step, simulate_path
from .mc import ComparisonRow, TailEstimate, compare, estimate_tail
from .regime import Regime

__version__ = "0.1.0"
