"""Certificates for spatial mixing of the hard-core model on branching trees."""

__version__ = "0.1.0"
