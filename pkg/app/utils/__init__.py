"""
Utils Package

This package contains utility functions and helpers used throughout the application.
"""
