"""Dilatively stable processes: scaling laws, moment bounds, simulation and path statistics."""

__version__ = "0.1.0"
