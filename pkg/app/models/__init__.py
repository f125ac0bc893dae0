"""
Models Package

This package contains the model taxonomy and the pairing of a model with
its influence function and interaction potential.
"""
