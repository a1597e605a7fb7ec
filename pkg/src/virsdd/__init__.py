"""Within-host viral dynamics with a state-dependent eclipse delay."""
from .delay import CATALOG, Constant, Custom, PointwiseQuadratic, Reciprocal, check_H1, eval_delay
from .equilibrium import Equilibrium, check_H2, check_H3, equilibrium, solve_That
from .errors import (BlowupError, ConfigError, DelayRangeError, DomainError, HypothesisError,
                     OutOfDomainError, StepFailureError, UnsupportedFamilyError, VirSDDError)
from .history import (CallableHistory, ConstantHistory, HistorySegment, PiecewiseLinearHistory,
                      Trajectory, read_csv, write_csv)
from .integrator import SimConfig, check_compatibility, integrate
from .model import P0, ModelParams, StatePoint, response_f, rhs

__version__ = "0.1.0"
