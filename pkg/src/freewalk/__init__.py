"""Random walks on free groups acting on their Cayley trees."""

__version__ = "0.1.0"
