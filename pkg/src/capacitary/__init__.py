"""Capacitary Muckenhoupt weights on dyadic grids."""

__version__ = "0.1.0"
