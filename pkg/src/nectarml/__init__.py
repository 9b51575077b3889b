"""Overlapping community detection with learned objective-function selection."""

__version__ = "0.1.0"
