"""Direction-aware diagonal autoregressive generation over token grids."""

__version__ = "0.1.0"
