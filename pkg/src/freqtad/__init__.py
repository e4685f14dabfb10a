"""Frequency-decoupled temporal action detection on pre-extracted features."""

__version__ = "0.1.0"
