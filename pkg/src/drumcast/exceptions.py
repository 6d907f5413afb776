"""Exception hierarchy.

Errors fall in three families that the CLI maps to exit codes:
``ConfigError`` (2), ``DataError`` (3) and ``StageError`` (4).
``ModelError`` covers numerical failures inside the forecasters.
"""


class DrumcastError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DrumcastError, ValueError):
    """Invalid configuration, specification or argument."""


class DataError(DrumcastError, ValueError):
    """Input data violates a precondition."""


class StageError(DrumcastError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


class ModelError(DrumcastError, ArithmeticError):
    """Numerical failure inside a model."""


# series-core
class MalformedRow(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class DuplicateTimestamp(DataError):
    pass


class NonMonotonicTimestamp(DataError):
    pass


class IrregularSampling(DataError):
    pass


class GapTooLong(DataError):
    pass


class WindowTooLarge(DataError):
    pass


class DegenerateVariance(DataError):
    pass


class EmptySplit(DataError):
    pass


class UnknownVariable(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownConfigVariable(ConfigError, UnknownVariable):
    """A configuration names a variable the input does not have."""


# causal-screen
class TooFewPairs(DataError):
    pass


class EmptyCandidates(ConfigError):
    pass


class SingularDesign(DataError):
    pass


# delay-infer
class DegenerateWindow(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class LagExceedsLength(DataError):
    pass


# forecast-models
class ShapeMismatch(DataError):
    pass


class EmptyHistory(DataError):
    pass


class InsufficientData(DataError):
    pass


class NonFiniteActivation(ModelError):
    pass


class NonFiniteGradient(ModelError):
    pass


class Diverged(ModelError):
    pass


# evaluation
class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class UnknownModel(ConfigError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# synthetic-data
class InvalidSpec(ConfigError):
    pass


class UnstableSystem(ConfigError):
    pass
