"""Validation modules for the kinetic market laboratory."""

__all__ = []
