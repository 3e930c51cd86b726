"""Exception types raised across the pipeline.

Every error derives from :class:`ProfileCheckError` so the CLI can map any
module failure to exit code 1 with a single ``except`` clause.
"""


class ProfileCheckError(Exception):
    """Base class for all domain errors."""


class MissingColumn(ProfileCheckError):
    pass


class BadValue(ProfileCheckError, ValueError):
    pass


class EmptySet(ProfileCheckError, ValueError):
    pass


class SingleClass(ProfileCheckError, ValueError):
    pass


class TooFewRows(ProfileCheckError, ValueError):
    pass


class NotSymmetric(ProfileCheckError, ValueError):
    pass


class NoConvergence(ProfileCheckError, RuntimeError):
    pass


class Singular(ProfileCheckError, ValueError):
    pass


class AllFeaturesRemoved(ProfileCheckError):
    pass


class NonBinaryLabels(ProfileCheckError, ValueError):
    pass


class Diverged(ProfileCheckError, RuntimeError):
    pass


class DimensionMismatch(ProfileCheckError, ValueError):
    pass


class DegenerateData(ProfileCheckError, ValueError):
    pass


class LengthMismatch(ProfileCheckError, ValueError):
    pass


class FractionTooSmall(ProfileCheckError, ValueError):
    pass
