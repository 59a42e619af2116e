"""Exception hierarchy used across the package.

Every failure mode raised by the library derives from :class:`StochproxError`
so callers (and the CLI) can map error families to exit codes.
"""


class StochproxError(Exception):
    """Base class for all stochprox errors."""


class InvalidComponentError(StochproxError, ValueError):
    """A component is malformed (zero direction vector, negative weight, ...)."""


class InvalidStepsizeError(StochproxError, ValueError):
    """A smoothing parameter / stepsize is outside its admissible range."""


class DivergesError(StochproxError, RuntimeError):
    """The scalar prox subproblem could not be bracketed (loss unbounded below)."""


class InvalidSpecError(StochproxError, ValueError):
    """An instance specification has inconsistent or empty counts."""


class InfeasibleProblemError(StochproxError, RuntimeError):
    """The feasibility residual stalled above tolerance; constraints look empty."""


class MaxIterationsError(StochproxError, RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance."""


class StepsizeTooLargeError(StochproxError, ValueError):
    """A stepsize makes 1 - mu * sigma negative, so the bound is not a contraction."""


class UnsupportedScheduleError(StochproxError, ValueError):
    """Rate classification only covers decay exponents gamma in (0, 1]."""


class DomainError(StochproxError, ValueError):
    """A scalar argument lies outside the mathematical domain of a formula."""


class CaseViolationError(StochproxError, ValueError):
    """Inputs violate the structural premise of the requested constants case."""


class InsufficientSamplesError(StochproxError, RuntimeError):
    """All regularity-estimator samples were discarded as near-feasible."""


class UndefinedSlopeError(StochproxError, ValueError):
    """Rate-slope fitting met nonpositive metric values in the fit window."""


class UncertifiedModelError(StochproxError, ValueError):
    """An optimal-set model lacks the certification its metric requires."""


class UnsupportedComponentError(StochproxError, ValueError):
    """An operation does not support this component kind."""


class SerializationError(StochproxError, ValueError):
    """The problem cannot be round-tripped through the JSON schema."""


class SolverError(StochproxError, RuntimeError):
    """An iteration of the stochastic solver failed; message carries the index."""


class ConfigError(StochproxError, ValueError):
    """Experiment configuration failed validation; message names the field."""


class TraceSchemaError(StochproxError, ValueError):
    """A trace CSV does not match the fixed column schema."""


class EmptyInputError(StochproxError, ValueError):
    """An input file contains no data rows."""
