"""Exception types shared across the engine."""


class OvcdError(Exception):
    """Base class for all engine errors."""


class DimensionMismatch(OvcdError, ValueError):
    """Two rasters that must share dimensions do not."""


class ConfigError(OvcdError, ValueError):
    """Invalid pipeline, tiling or sweep configuration."""


class DatasetError(OvcdError):
    """Dataset directory is missing pairs or holds malformed files."""


class BackendError(OvcdError):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Network-level failure while talking to a remote backend."""


class SchemaViolation(BackendError):
    """A wire payload did not conform to the published JSON schema."""


class ServerError(BackendError):
    """Structured error reported by a backend server."""


class ContractViolation(BackendError):
    """A backend response broke an interface invariant (non-finite logits,
    out-of-range presence or confidence, mismatched dimensions)."""
