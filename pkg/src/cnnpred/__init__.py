"""CNN-based stock index direction prediction from multi-source daily features."""

__version__ = "0.1.0"
