"""Orbit design for observer fleets by maximizing the worst-case perception quality."""

__version__ = "0.1.0"
