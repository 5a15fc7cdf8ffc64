"""Spatio-temporal analytics for GPS traces in public parks."""

__version__ = "0.1.0"
