"""Run manifests: what was run, with which inputs, by which versions."""

import hashlib
import json
import os
import platform
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping

import numpy as np
import scipy

from .. import __version__
from ..config import constants

TOLERANCE_NAMES = (
    "QUAD_TOL", "MAX_SUBDIVISION_DEPTH", "BISECTION_TOL", "MAX_BISECTION_STEPS",
    "EPS_BOUNDARY", "CFL_LIMIT", "MIN_VELOCITY_SLICES", "EPS_QUAD", "EPS_POS", "INEQ_TOL",
    "MAX_ITERATIONS", "DIVERGENCE_BOUND", "FINITE_MASS_TOL", "THRESHOLD_BAND", "BALANCE_RTOL",
)


def config_hash(document: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a scenario document."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def versions() -> Dict[str, str]:
    return {
        "kinetic_market": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def tolerances() -> Dict[str, float]:
    """Numerical tolerances and caps the run was made with."""
    return {name: getattr(constants, name) for name in TOLERANCE_NAMES}


@dataclass
class RunManifest:
    """Provenance record written next to every set of artifacts."""
    command: str
    scenario: str
    config_hash: str
    seeds: List[int] = field(default_factory=list)
    parameters: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    started: float = field(default_factory=time.time)
    wall_time: float = 0.0

    def finish(self) -> "RunManifest":
        self.wall_time = time.time() - self.started
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "seeds": list(self.seeds),
            "parameters": dict(self.parameters),
            "artifacts": sorted(self.artifacts),
            "versions": versions(),
            "tolerances": tolerances(),
            "started": self.started,
            "wall_time": self.wall_time,
        }

    def write(self, directory: str, name: str = "manifest.json") -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, name)
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
        return path


def write_json(path: str, payload: Mapping[str, Any]) -> str:
    """Write a JSON report; non-finite floats are written as strings."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(jsonable(payload), handle, indent=2, sort_keys=True)
    return path


def jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value
