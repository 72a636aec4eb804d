"""Certified derivative bounds for mild functions and C^r-parameterization atlases."""

__version__ = "0.1.0"
