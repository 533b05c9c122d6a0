"""HTTP service wrapping the tracking core."""

from .app import create_app

__all__ = ["create_app"]
