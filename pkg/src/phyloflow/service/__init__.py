"""HTTP API and CLI exposing the full pipeline."""

from .app import ServiceConfig, create_app, serve

__all__ = ["ServiceConfig", "create_app", "serve"]
