"""Exception hierarchy shared by every lytnet module."""


class LytNetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LytNetError, ValueError):
    """Operator or model parameters are inconsistent with each other."""


class ValidationError(LytNetError, ValueError):
    """Input data violates a documented invariant."""


class FormatError(LytNetError, ValueError):
    """A file could not be parsed in the expected on-disk format."""


class LayerError(ConfigurationError):
    """A shape or parameter problem at a specific network layer."""

    def __init__(self, layer, message):
        super().__init__(f"{layer}: {message}")
        self.layer = layer


class UndefinedDirectionError(LytNetError, ValueError):
    """A direction vector has zero length."""


class DegeneratePointError(LytNetError, ValueError):
    """A point maps to (or beyond) the horizon under a homography."""


class SessionError(LytNetError, ValueError):
    """A guidance session received out-of-order or malformed frames."""
