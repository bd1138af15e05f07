"""Exception types shared across the toolkit."""


class RepalignError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(RepalignError):
    """Malformed manifest, missing entry, or payload/manifest mismatch."""


class DataError(RepalignError):
    """Input data violates an operation's preconditions or invariants."""


class ConfigError(RepalignError):
    """Invalid run configuration."""
