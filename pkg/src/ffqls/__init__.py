"""Frustration-free quasi-local stabilization: decide, synthesize and verify."""

__version__ = "0.1.0"
