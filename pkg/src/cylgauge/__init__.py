"""Dense cylinder wall reconstruction from sparse laser-gauge readings."""

__version__ = "0.1.0"
