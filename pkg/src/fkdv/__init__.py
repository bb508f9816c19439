"""Periodic spectral tools for solitary waves of u_t + (a u^p + u^q)_x - (D^sigma u)_x = 0."""

__version__ = "0.1.0"
