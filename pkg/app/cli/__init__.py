"""
CLI Package

This package contains scenario loading, the batch commands and the
verification batteries.
"""
