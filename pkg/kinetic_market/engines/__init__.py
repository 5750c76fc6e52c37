"""Simulation engines for the kinetic market laboratory."""

from .base import BaseEngine, EngineRun
from .fluid_engine import FluidEngine
from .particle_engine import ParticleEngine

__all__ = ["BaseEngine", "EngineRun", "FluidEngine", "ParticleEngine"]
