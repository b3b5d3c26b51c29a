"""Utility functions for the EETC project."""
