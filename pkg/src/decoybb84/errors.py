"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Raised when a parameter or configuration violates a precondition."""


class EstimateUnavailable(RuntimeError):
    """Raised when a statistical estimate degenerates and the protocol must abort
    (e.g. no single-photon events survive the lower bound)."""


class NoAdmissibleKey(RuntimeError):
    """Raised when the epsilon budget leaves no room for a secure key."""
