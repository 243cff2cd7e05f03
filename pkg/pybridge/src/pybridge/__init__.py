"""Serve any Python scoring callable as an external masked-input model."""
from .adapter import PROTOCOL_VERSION, AdapterConfig, serve

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "PROTOCOL_VERSION", "serve", "__version__"]
