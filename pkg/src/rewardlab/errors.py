"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value (bad layer sizes, tau out of range, ...)."""


class ShapeError(ValueError):
    """Array dimensions disagree with the declared architecture."""


class DomainError(ValueError):
    """Numeric argument outside its mathematical domain (e.g. negative distance)."""


class NotReadyError(RuntimeError):
    """Operation requested before its preconditions are met (e.g. underfilled buffer)."""


class ProtocolError(RuntimeError):
    """Interaction protocol violated (e.g. stepping a finished episode)."""
