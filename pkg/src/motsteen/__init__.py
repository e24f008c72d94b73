"""motsteen: exact computations in the C-motivic Steenrod algebra at p=2."""

__version__ = "0.1.0"
