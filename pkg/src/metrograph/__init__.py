"""Graph models of metro networks."""
__version__ = "0.1.0"
