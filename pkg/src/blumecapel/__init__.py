"""Blume-Capel model and its dilute random-cluster representation."""

__version__ = "0.1.0"
