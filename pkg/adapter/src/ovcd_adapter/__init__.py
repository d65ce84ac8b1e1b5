"""Reference wire-protocol model server with a classical fallback."""

from .app import create_app
from .config import AdapterConfig, calibrate_logits

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "calibrate_logits", "create_app"]
