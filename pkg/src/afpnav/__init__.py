"""Frequency-adaptive acoustic field prediction for audio-goal navigation on grid worlds."""

__version__ = "0.1.0"
