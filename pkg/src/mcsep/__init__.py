"""Multi-channel speech separation with spectral-spatial attention fusion and
deep embedding features."""

__version__ = "0.1.0"
