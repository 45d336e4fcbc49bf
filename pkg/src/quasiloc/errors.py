"""Exception hierarchy.

Each family maps to a CLI exit code so that a failing pipeline stage can be
reported without inspecting message strings.
"""


class QuasilocError(Exception):
    exit_code = 1


class HypothesisFailure(QuasilocError):
    """A structural hypothesis (S), (G), (A1) or (ND) does not hold."""

    exit_code = 2


class ExistenceFailure(HypothesisFailure):
    """Shooting found no ground state for the given nonlinearity."""


class ConstructionFailure(HypothesisFailure):
    """The admissible scaling window is empty."""


class SimplicityViolation(HypothesisFailure):
    """Two cylinder modes coincide within tolerance."""


class NDFailure(HypothesisFailure):
    """The frequency matrix is rank deficient."""


class NumericFailure(QuasilocError):
    exit_code = 3


class ConditioningError(NumericFailure):
    pass


class ChaoticOrbitError(NumericFailure):
    """No dominant spectral line in a trajectory signal."""


class DomainError(QuasilocError, ValueError):
    exit_code = 64


class ConfigError(QuasilocError, ValueError):
    exit_code = 64
