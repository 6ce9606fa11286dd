"""Exception hierarchy for chirpcode.

Every failure raised by the library derives from ChirpcodeError so callers
(and the CLI) can distinguish library failures from programming errors.
"""


class ChirpcodeError(Exception):
    """Base class for all chirpcode failures."""


class ParameterError(ChirpcodeError):
    """A filter parameter violates its domain (e.g. negative frequency)."""


class SynthesisError(ChirpcodeError):
    """Atom synthesis produced a degenerate (zero-norm or non-finite) filter."""


class ConfigError(ChirpcodeError):
    """Invalid dictionary geometry, solver, or adaptation configuration."""


class SignalError(ChirpcodeError):
    """An input signal is unusable (too short, wrong shape, non-finite)."""


class CodeError(ChirpcodeError):
    """A sparse code is inconsistent (out-of-range indices, duplicates)."""


class SolverError(ChirpcodeError):
    """The LCA iteration diverged or produced non-finite values."""


class GradientError(ChirpcodeError):
    """Gradient computation failed (non-finite values or a trace mismatch)."""


class OptimizerError(ChirpcodeError):
    """An optimizer update produced non-finite parameters."""


class AudioIngestError(ChirpcodeError):
    """A WAV file or corpus manifest could not be ingested."""
