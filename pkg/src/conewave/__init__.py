"""Reflection scheme for wave maps on the light cone with sphere-valued boundary data."""

__version__ = "0.1.0"
