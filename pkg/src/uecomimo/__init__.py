"""Collaborative-MIMO relay toolkit: channels, rank-update spectra, phase search and experiments."""

__version__ = "0.1.0"
