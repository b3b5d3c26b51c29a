"""Exactness checks and trajectory simulation."""
