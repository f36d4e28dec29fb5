"""Transient 2D finite-element heat conduction for electric-machine cross-sections."""

__version__ = "0.1.0"
