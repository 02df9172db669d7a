"""Co-simulation of load frequency control under load-altering attacks."""

__version__ = "0.1.0"
