"""Base engine interface for scenario simulations."""

import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..config.constants import EngineKind, ModelTier
from ..models.errors import ConfigError, ErrorDetail, ErrorSeverity
from ..models.scenario import Scenario


@dataclass
class EngineRun:
    """Artifacts and summary numbers of one simulate invocation."""
    engine: EngineKind
    artifacts: List[str] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


class BaseEngine(ABC):
    """Abstract base class for engines that advance a scenario in time."""

    kind: EngineKind
    tiers: Tuple[ModelTier, ...] = ()

    @abstractmethod
    def run(
        self,
        scenario: Scenario,
        out_dir: str,
        seeds: Optional[List[int]] = None,
    ) -> EngineRun:
        """
        Simulate a scenario and write its artifacts.

        Args:
            scenario: Validated scenario
            out_dir: Directory receiving CSV artifacts
            seeds: Replica seeds; engines without randomness ignore them

        Returns:
            EngineRun listing the files written

        Raises:
            ConfigError: If the engine does not support the scenario's tier
            KineticError: On runtime failures such as CFL violations
        """
        pass

    def _check_tier(self, scenario: Scenario) -> None:
        if scenario.model_tier not in self.tiers:
            supported = ", ".join(t.value for t in self.tiers)
            raise ConfigError(
                f"Engine {self.kind.value} does not run tier {scenario.model_tier.value}",
                [ErrorDetail(
                    severity=ErrorSeverity.ERROR,
                    message=f"Engine {self.kind.value} supports tiers: {supported}",
                    error_type="UNSUPPORTED_TIER",
                    field="model_tier",
                )],
            )

    @staticmethod
    def _path(out_dir: str, name: str) -> str:
        return os.path.join(out_dir, name)
