class RanklabError(Exception):
    """Base class for errors raised by ranklab."""


class ParameterError(RanklabError, ValueError):
    """A distribution or operation parameter is outside its domain."""


class DomainError(RanklabError, ValueError):
    """An evaluation point or grid lies outside the support."""


class UnsupportedOperation(RanklabError):
    """The operation is undefined for this variant (e.g. sampling an improper prior)."""


class MomentUndefined(RanklabError):
    """The requested moment does not exist."""


class IntegrationError(RanklabError):
    """A numerical integral failed or diverged."""


class DegeneratePosteriorError(RanklabError):
    """The posterior has zero mass on every tried window."""


class ShapeError(RanklabError, ValueError):
    """Array lengths disagree."""


class SizeLimitError(RanklabError, ValueError):
    """Input too large for an exhaustive method."""


class ConfigError(RanklabError):
    """Invalid or incomplete experiment configuration."""
