"""Multi-term Tikhonov solvers (GSVD, alternating minimization) and a
masked correlation-filter tracker built on them."""

from .errors import InputError, NumericalError, TikcfError
from .linalg import GsvdFactors, gsvd, tikhonov_solve_gsvd
from .objective import ProblemInstance, WeightConfig, evaluate_loss
from .solvers import SolverConfig, run, run_aux_optimizer, run_online_optimizer
from .tracker import BoundingBox, Frame, TrackerConfig, track_sequence

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "Frame", "GsvdFactors", "InputError", "NumericalError", "ProblemInstance",
    "SolverConfig", "TikcfError", "TrackerConfig", "WeightConfig", "evaluate_loss", "gsvd",
    "run", "run_aux_optimizer", "run_online_optimizer", "tikhonov_solve_gsvd", "track_sequence",
]
