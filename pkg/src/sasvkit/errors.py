"""Exception types shared across the toolkit.

Every error raised on a bad input derives from SasvError so callers
(notably the CLI) can map the whole family to a single exit code.
"""


class SasvError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(SasvError):
    """Vector or matrix dimensions do not agree."""


class ZeroNorm(SasvError):
    """A vector with zero norm where a direction is required."""


class UnlabeledTrial(SasvError):
    """A trial without a label in a context that requires one."""


class DuplicateId(SasvError):
    """An utterance ID inserted twice into one set."""


class DuplicateTrial(SasvError):
    """The same (enroll, test) pair appearing twice in one score set."""


class MissingEmbedding(SasvError):
    """A trial references an utterance ID with no embedding."""


class EmptyCohort(SasvError):
    """Cohort selection over an empty cohort set."""


class EmptyList(SasvError):
    """Statistics requested over an empty score list."""


class TrialMismatch(SasvError):
    """Two score sets that must cover the same trials do not."""


class BadWeights(SasvError):
    """Ensemble weights of wrong length or non-positive sum."""


class EmptyClass(SasvError):
    """A metric needs at least one score from a class that is empty."""


class InvalidBatch(SasvError):
    """A loss batch violating its shape or label constraints."""


class ValueOutOfRange(SasvError):
    """A similarity outside [-1, 1] or comparable domain violation."""


class BadK(SasvError):
    """Top-k parameter outside the valid range."""


class BadParams(SasvError):
    """Invalid generation or evaluation parameters."""


class TooFewSpeakers(SasvError):
    """PK sampling asked for more speakers per batch than exist."""


class DivergenceDetected(SasvError):
    """Training loss became non-finite; carries the failing step index."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class ParseError(SasvError):
    """File content that cannot be parsed; carries a location."""

    def __init__(self, message, line=None, offset=None):
        self.line = line
        self.offset = offset
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif offset is not None:
            loc = f" (byte offset {offset})"
        super().__init__(message + loc)


class DimensionDrift(ParseError):
    """An embedding line whose dimension differs from earlier lines."""
