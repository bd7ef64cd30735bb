"""Exception hierarchy. Every message names the module that raised it."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PipelineError, ValueError):
    """Invalid argument or configuration value."""


class FormatError(PipelineError):
    """On-disk corpus/checkpoint data violates its declared format."""


class InsufficientDataError(PipelineError):
    """Too few samples for the requested statistic."""


class NumericalError(PipelineError):
    """A numerical routine failed (e.g. factorization after regularization)."""


class GenerationError(PipelineError):
    """Pseudo-OOD synthesis could not satisfy its constraints."""


class TrainingError(PipelineError):
    """Training diverged or violated an internal contract."""


class MetricError(PipelineError):
    """A metric is undefined for the given inputs."""
