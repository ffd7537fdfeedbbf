"""Rate analysis and coded-modulation simulation for the multibeam satellite forward link."""

__version__ = "0.1.0"
