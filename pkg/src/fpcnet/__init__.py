"""Fully point-wise convolutional networks for colour constancy and dehazing."""

__version__ = "0.1.0"
