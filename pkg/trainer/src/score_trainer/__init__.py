"""Training component for the system-segmentation networks."""

__version__ = "0.1.0"
