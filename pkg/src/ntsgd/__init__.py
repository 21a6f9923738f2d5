"""Truncated and noisy truncated SGD, with objectives, datasets and
experiment drivers."""

__version__ = "0.1.0"
