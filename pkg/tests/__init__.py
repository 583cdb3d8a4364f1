"""
Test package for edgefuse.
"""
