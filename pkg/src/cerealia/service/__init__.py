"""HTTP service wrapping the streaming checker."""

from .app import create_app

__all__ = ["create_app"]
