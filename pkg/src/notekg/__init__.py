"""Assertion-aware patient knowledge graphs with an intent-routed retrieval
and deterministic evaluation harness."""

__version__ = "0.1.0"
