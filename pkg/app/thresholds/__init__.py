"""
Thresholds Package

This package contains the analytic threshold functions and the pointwise
classifiers of initial data.
"""
