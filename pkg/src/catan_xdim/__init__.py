"""Cross-dimensional self-play workbench for two-player Catan."""

__version__ = "0.1.0"
