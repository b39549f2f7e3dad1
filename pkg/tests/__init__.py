"""
Test suite for bhnoma.

This package contains unit tests and integration tests for the beam-hopping NOMA optimizer.
"""
