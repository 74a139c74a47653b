"""Sheet-music system segmentation and dataset packaging toolkit."""

__version__ = "0.1.0"
