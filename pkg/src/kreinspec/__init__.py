"""Spectra, exceptional points and triple points of PT-symmetric operator families."""

__version__ = "0.1.0"
