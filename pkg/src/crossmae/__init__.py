"""Cross-modal masked autoencoding of satellite and UAV plot imagery."""

__version__ = "0.1.0"
