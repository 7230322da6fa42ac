"""Short closed geodesics on finite-area surfaces with ends."""

__version__ = "0.1.0"
