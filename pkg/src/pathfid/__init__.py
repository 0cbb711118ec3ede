"""Multi-hop QA as single-sequence reasoning-path generation."""

__version__ = "0.1.0"
