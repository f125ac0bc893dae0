"""
Tests Package

This package contains tests for the Network AI Assistant application.
"""
