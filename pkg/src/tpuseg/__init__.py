"""Simulation and planning toolkit for segmented inference on systolic-array edge accelerators."""

__version__ = "0.1.0"
