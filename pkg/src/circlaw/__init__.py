"""Numerical experiments for the circular law of random matrices whose rows
are independent but may have dependent entries."""
__version__ = "0.1.0"
