"""Recency-weighted BCE training for deep CTR models."""

__version__ = "0.1.0"
