"""Shared exception types.

Every error raised by the library derives from ToxpropError so callers
(and the CLI exit-code mapping) can catch one base class.
"""


class ToxpropError(Exception):
    """Base class for all toxprop errors."""


class DegenerateInput(ToxpropError):
    """Input is structurally valid but too small/empty to operate on."""


class ParseError(ToxpropError):
    """A record or label could not be parsed."""


class ShapeError(ToxpropError):
    """Mismatched lengths or dimensions."""


class ConfigError(ToxpropError):
    """Invalid or inconsistent configuration."""


class DomainError(ToxpropError):
    """Argument outside the mathematical domain of a function."""


class DataError(ToxpropError):
    """A data file is missing, malformed, or inconsistent with the model."""


class TrainingDiverged(ToxpropError):
    """Training produced a non-finite loss.

    Carries the last model checkpoint whose loss was still finite (possibly
    None when divergence happened before the first finite epoch).
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
