"""Communication-assisted steering bounds and the calibration chain around them."""

__version__ = "1.0.0"
