"""Utility modules for the polyvem solver."""
