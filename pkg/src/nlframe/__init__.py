"""Signal reconstruction from nonlinear measurements with certified constants."""
__version__ = "0.1.0"
