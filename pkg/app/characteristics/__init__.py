"""
Characteristics Package

This package contains the characteristic integrator, its diagnostics and
the empirical threshold search.
"""
