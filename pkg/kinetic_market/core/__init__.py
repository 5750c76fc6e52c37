"""Core modules for the kinetic market laboratory."""

from .criteria import CriterionResult, ValidationReport
from .laboratory import Laboratory, LabResult

__all__ = ["CriterionResult", "LabResult", "Laboratory", "ValidationReport"]
