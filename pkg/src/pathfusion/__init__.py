"""Multimodal survival modeling from pathway-grouped expression and tissue patches."""

from .backend import active_backend

__version__ = "0.1.0"

__all__ = ["active_backend", "__version__"]
