"""Solvers and simulators of the two-phase market dynamics."""

__all__ = []
