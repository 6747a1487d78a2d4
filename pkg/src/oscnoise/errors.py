"""Exception hierarchy for the oscillator noise engine.

Every stage raises a dedicated subclass so the pipeline can report which
stage failed and with what remediation hint.
"""


class OscNoiseError(Exception):
    """Base class for all engine errors."""


class ModelDefinitionError(OscNoiseError):
    """A model callback broke its dimensional contract."""


class EvaluationError(OscNoiseError):
    """A model callback produced non-finite entries."""


class ParameterError(OscNoiseError):
    """Component values outside their physical domain."""


class ConfigurationError(OscNoiseError):
    """Invalid run configuration (sweep ranges, node names, truncation)."""


class NoConvergenceError(OscNoiseError):
    """Newton iteration failed to reach the requested tolerance."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class DegenerateSolutionError(OscNoiseError):
    """Periodic solve collapsed (period shrank to zero or ran away)."""


class RankDeficiencyError(OscNoiseError):
    """Singular linear solve during time stepping."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class AliasingError(OscNoiseError):
    """Requested harmonic truncation too large for the time grid."""


class NumericalError(OscNoiseError):
    """Dense eigensolver failed to converge."""


class DegenerateSpectrumError(OscNoiseError):
    """Monodromy eigenvalues collide within the pairing tolerance."""


class ModeConsistencyError(OscNoiseError):
    """Retained-mode count is inconsistent with the ensemble size."""


class FloquetConsistencyError(OscNoiseError):
    """Detrended mode series failed the periodicity check."""


class ResonantDenominatorError(OscNoiseError):
    """A harmonic-sum denominator vanished (degenerate mode layout)."""

    def __init__(self, message, mode=None, harmonic=None):
        super().__init__(message)
        self.mode = mode
        self.harmonic = harmonic


class DeadNodeError(OscNoiseError):
    """Observation node carries no power at the requested harmonic."""


class InternalConsistencyError(OscNoiseError):
    """A structurally real/non-negative quantity came out otherwise."""


class InstabilityError(OscNoiseError):
    """A stochastic path diverged; the step size is likely too large."""
