"""FastAPI service wrapping the core pipeline."""

from .app import app

__all__ = ["app"]
