"""Opinion dynamics over dynamic signed random networks (state-flipping model)."""

__version__ = "0.1.0"
