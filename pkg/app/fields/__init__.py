"""
Fields Package

This package contains influence functions, interaction potentials, the
particle ensemble and the nonlocal fields evaluated on it.
"""
