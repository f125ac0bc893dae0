"""
Critical Threshold Lab Application Package

This package contains the characteristic integrator, the analytic threshold
classifiers and the isothermal solver for 1D Euler-alignment dynamics.
"""

__version__ = "0.1.0"
