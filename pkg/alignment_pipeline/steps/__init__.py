"""Experiment step modules."""
