"""HTTP service exposing runs, transport verification and admissibility."""

from .app import app

__all__ = ["app"]
