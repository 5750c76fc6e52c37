"""Scenario definitions driving the command-line laboratory."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..config.constants import R_MAX_MARGIN, ModelTier
from .data import CompactRateFunction, InitialDensity, MarketParams, NetworkSpec


@dataclass
class Numerics:
    """Grid, time step and Monte Carlo settings of a scenario."""
    dr: float = 1e-3
    dt: float = 5e-4
    T: float = 1.0
    r_max: Optional[float] = None
    seeds: List[int] = field(default_factory=lambda: [0])
    replicas: int = 1
    intensity_scale: float = 100.0
    n_ladder: List[float] = field(default_factory=list)
    bin_width: float = 0.1
    sample_every: int = 0
    boundary_extrapolation: bool = False

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Numerics":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def replica_seeds(self) -> List[int]:
        """
        One seed per replica.

        Explicit seeds are used first; missing ones continue upward from the
        largest given seed.
        """
        seeds = list(self.seeds[: self.replicas])
        next_seed = max(self.seeds, default=-1) + 1
        while len(seeds) < self.replicas:
            seeds.append(next_seed)
            next_seed += 1
        return seeds


@dataclass
class Outputs:
    """Where and what to write."""
    directory: str = "runs"
    write_events: bool = True

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Outputs":
        return cls(
            directory=str(data.get("directory", "runs")),
            write_events=bool(data.get("write_events", True)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"directory": self.directory, "write_events": self.write_events}


@dataclass(frozen=True)
class FreeSetup:
    """
    One-phase free dynamics on a finite interval.

    The initial density is f0(|x - center|) spread uniformly over the
    velocity range, the death rate is mu(|x|) and the arrival intensity
    lambda(|x|); both are time- and velocity-independent.
    """
    interval: Tuple[float, float]
    v_bound: float
    nx: int
    nv: int
    f0: CompactRateFunction
    center: float = 0.0
    mu: Optional[CompactRateFunction] = None
    lam: Optional[CompactRateFunction] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FreeSetup":
        def rate(key: str) -> Optional[CompactRateFunction]:
            value = data.get(key)
            return CompactRateFunction.from_dict(value) if value is not None else None

        lo, hi = data["interval"]
        return cls(
            interval=(float(lo), float(hi)),
            v_bound=float(data["v_bound"]),
            nx=int(data["nx"]),
            nv=int(data["nv"]),
            f0=CompactRateFunction.from_dict(data["f0"]),
            center=float(data.get("center", 0.0)),
            mu=rate("mu"),
            lam=rate("lambda"),
        )

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "interval": list(self.interval),
            "v_bound": self.v_bound,
            "nx": self.nx,
            "nv": self.nv,
            "f0": self.f0.to_dict(),
            "center": self.center,
        }
        if self.mu is not None:
            out["mu"] = self.mu.to_dict()
        if self.lam is not None:
            out["lambda"] = self.lam.to_dict()
        return out

    def initial_density(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.f0(np.abs(x - self.center)), dtype=float) * np.ones_like(v)

    def death_rate(self, x, v, t=0.0):
        rate = self.mu(np.abs(x)) if self.mu is not None else 0.0
        return rate * np.ones_like(v, dtype=float)

    def arrival_rate(self, x, v, t=0.0):
        rate = self.lam(np.abs(x)) if self.lam is not None else 0.0
        return rate * np.ones_like(v, dtype=float)


@dataclass
class Validation:
    """Criteria the validate command runs; empty means every applicable one."""
    criteria: List[str] = field(default_factory=list)
    free_scenarios: int = 5

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Validation":
        return cls(
            criteria=[str(c) for c in data.get("criteria", [])],
            free_scenarios=int(data.get("free_scenarios", 5)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"criteria": list(self.criteria), "free_scenarios": self.free_scenarios}


@dataclass
class Scenario:
    """
    A complete, validated laboratory scenario.

    Exactly one of ``market``, ``network`` and ``free`` is set, according to
    the tier. ``raw`` keeps the parsed document for the run manifest.
    """
    model_tier: ModelTier
    name: str = "scenario"
    market: Optional[MarketParams] = None
    network: Optional[NetworkSpec] = None
    free: Optional[FreeSetup] = None
    initial: Optional[InitialDensity] = None
    initial_network: List[InitialDensity] = field(default_factory=list)
    numerics: Numerics = field(default_factory=Numerics)
    outputs: Outputs = field(default_factory=Outputs)
    validation: Validation = field(default_factory=Validation)
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def markets(self) -> Tuple[MarketParams, ...]:
        if self.network is not None:
            return self.network.markets
        return (self.market,) if self.market is not None else ()

    def support_radius(self) -> float:
        """Largest support radius over rates and initial densities."""
        radii = [m.support_radius for m in self.markets]
        inits = [self.initial] if self.initial is not None else list(self.initial_network)
        for init in inits:
            radii.extend((init.rho_plus.support_radius, init.rho_minus.support_radius))
        if self.network is not None:
            for table in (self.network.routing_minus_plus, self.network.routing_plus_minus):
                radii.extend(k.support_radius for k in table.values())
        return max(radii, default=0.0)

    def r_max(self) -> float:
        """Far end of the radial grid: R0 + (v_minus - v_plus) T + margin."""
        if self.numerics.r_max is not None:
            return float(self.numerics.r_max)
        spread = max((m.v_minus - m.v_plus for m in self.markets), default=0.0)
        return self.support_radius() + spread * self.numerics.T + R_MAX_MARGIN

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "model_tier": self.model_tier.value}
        if self.market is not None:
            out["market"] = self.market.to_dict()
        if self.network is not None:
            out["network"] = self.network.to_dict()
        if self.free is not None:
            out["free"] = self.free.to_dict()
        if self.initial is not None:
            out["initial"] = self.initial.to_dict()
        if self.initial_network:
            out["initial_network"] = [i.to_dict() for i in self.initial_network]
        out["numerics"] = self.numerics.to_dict()
        out["outputs"] = self.outputs.to_dict()
        out["validation"] = self.validation.to_dict()
        return out
