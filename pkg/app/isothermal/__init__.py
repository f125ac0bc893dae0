"""
Isothermal Package

This package contains the damped isothermal finite-volume solver, the
Riemann variables and the invariant region monitor.
"""
