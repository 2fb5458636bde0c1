"""Security analysis of CV-QKD with squeezed EPR sources and Gaussian modulation.

Covariance matrices use interleaved quadratures ``(x1, p1, x2, p2, ...)`` in
shot-noise units. The main entry points are :func:`key_rate`,
:func:`optimize_parameters`, the threshold solvers and :func:`simulate_run`.
"""

__version__ = "0.1.0"

from .errors import NoThresholdError, SolverError, TmsQkdError, UnphysicalStateError
from .montecarlo import RunConfig, estimate_covariance, simulate_run, weighted_alice
from .optimize import (
    SweepSpec,
    max_tolerable_loss,
    optimize_bob_noise,
    optimize_gain,
    optimize_parameters,
    sweep,
    tolerable_excess_noise,
)
from .protocol import (
    IDEAL_DETECTOR,
    ChannelParams,
    DetectorParams,
    ProtocolParams,
    alice_bob_covariance,
    mutual_information,
)
from .purification import (
    MeasuredTwoModeMatrix,
    PurificationParams,
    four_mode_matrix,
    solve_purification,
    theoretical_purification,
)
from .security import SecurityReport, holevo_bound, key_rate, key_rate_from_matrix, von_neumann_entropy
from .states import EprSpec, SqueezedSourceSpec
from .symplectic import symplectic_eigenvalues

__all__ = [
    "ChannelParams", "DetectorParams", "EprSpec", "IDEAL_DETECTOR", "MeasuredTwoModeMatrix",
    "NoThresholdError", "ProtocolParams", "PurificationParams", "RunConfig", "SecurityReport",
    "SolverError", "SqueezedSourceSpec", "SweepSpec", "TmsQkdError", "UnphysicalStateError",
    "alice_bob_covariance", "estimate_covariance", "four_mode_matrix", "holevo_bound", "key_rate",
    "key_rate_from_matrix", "max_tolerable_loss", "mutual_information", "optimize_bob_noise",
    "optimize_gain", "optimize_parameters", "simulate_run", "solve_purification", "sweep",
    "symplectic_eigenvalues", "theoretical_purification", "tolerable_excess_noise",
    "von_neumann_entropy", "weighted_alice",
]
