"""Error taxonomy shared by all modules.

The CLI maps these onto exit codes: InvalidConfig-style errors exit with 2,
numerical failures with 3.
"""


class FtnPulseError(Exception):
    """Base class for all package errors."""


class InvalidConfig(FtnPulseError):
    """A precondition on user-supplied configuration was violated."""


class OutOfInterval(FtnPulseError):
    """Evaluation point outside the basis support [-T_s/2, T_s/2]."""


class BasisTooSmall(FtnPulseError):
    """The stored eigenvalue tail cannot satisfy the requested criterion."""


class BasisMismatch(FtnPulseError):
    """Pulse parameters disagree with the time-bandwidth product of the basis."""


class DimensionMismatch(FtnPulseError):
    """Coefficient vector length incompatible with the basis or problem size."""


class ConvergenceFailure(FtnPulseError):
    """Eigen-decomposition or eigenvalue refinement missed its tolerance."""


class Infeasible(FtnPulseError):
    """The requested out-of-band energy is outside the achievable range."""


class NoConvergence(FtnPulseError):
    """No optimizer restart met the stationarity/feasibility tolerances."""


class CovarianceNotPD(FtnPulseError):
    """Banded Cholesky of the noise covariance failed beyond jitter tolerance."""
