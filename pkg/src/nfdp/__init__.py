"""Belief-state dynamic programming for channels with noisy feedback."""

__version__ = "0.1.0"
