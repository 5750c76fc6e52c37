"""Result records produced by the solvers and simulation engines."""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..config.constants import EquilibriumKind, Phase
from .data import CompactRateFunction

# (weight, kernel) pairs: a reinjection source sum_k weight_k * kernel_k(r)
Reinjection = Tuple[Tuple[float, CompactRateFunction], ...]


@dataclass(frozen=True)
class CriticalConstants:
    """
    Constants of one elementary market that do not depend on time.

    F_plus and F_minus are the exponents int_0^r mu / |v| tabulated on ``r``.
    The lambda_hat constants are the weighted arrival integrals, sigma the
    boundary flux scales sigma = |v| * gamma_cr; the alpha constants are
    the weighted recycling masses and are 0 without kernels.
    """
    gamma_cr_plus: float
    gamma_cr_minus: float
    gamma_cr: float
    lambda_hat_plus: float
    lambda_hat_minus: float
    sigma_plus: float
    sigma_minus: float
    alpha_mp: float = 0.0
    alpha_pm: float = 0.0
    gamma_hat_cr: float = 0.0
    r: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False, compare=False)
    F_plus: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False, compare=False)
    F_minus: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False, compare=False)

    @property
    def critical_gap(self) -> float:
        return abs(self.gamma_cr_plus - self.gamma_cr_minus)

    def to_dict(self) -> Dict[str, float]:
        return {
            "gamma_cr_plus": self.gamma_cr_plus,
            "gamma_cr_minus": self.gamma_cr_minus,
            "gamma_cr": self.gamma_cr,
            "lambda_hat_plus": self.lambda_hat_plus,
            "lambda_hat_minus": self.lambda_hat_minus,
            "sigma_plus": self.sigma_plus,
            "sigma_minus": self.sigma_minus,
            "alpha_mp": self.alpha_mp,
            "alpha_pm": self.alpha_pm,
            "gamma_hat_cr": self.gamma_hat_cr,
            "critical_gap": self.critical_gap,
        }


@dataclass(frozen=True)
class NoFixedPoint:
    """Boundary density below the existence threshold: no fixed point."""
    threshold: float
    gamma_plus: float
    threshold_name: str = "gamma_cr"

    no_fixed_point = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "no_fixed_point": True,
            self.threshold_name: self.threshold,
            "gamma_plus": self.gamma_plus,
        }


@dataclass(frozen=True)
class EquilibriumProfile:
    """
    Time-independent densities of one market, tabulated on a radial grid.

    Tail densities are the limits of rho as r -> inf; the profile has finite
    mass iff both vanish. ``reinjection_plus``/``reinjection_minus`` carry
    the recycled-mass sources the profile was built with, so residual checks
    can substitute it back into the same equations.
    """
    kind: EquilibriumKind
    r: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    gamma_plus: float
    gamma_minus: float
    beta: float
    nu: float
    mass_plus: float
    mass_minus: float
    tail_plus: float
    tail_minus: float
    finite_mass: bool
    critical_gap: float
    reinjection_plus: Reinjection = ()
    reinjection_minus: Reinjection = ()
    market: Optional[int] = None

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    def rows(self) -> Iterator[Tuple[str, float, float]]:
        """(phase, r, rho) rows for CSV export."""
        for phase, rho in ((Phase.PLUS.value, self.rho_plus), (Phase.MINUS.value, self.rho_minus)):
            for ri, value in zip(self.r, rho):
                yield phase, float(ri), float(value)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "kind": self.kind.value,
            "gamma_plus": self.gamma_plus,
            "gamma_minus": self.gamma_minus,
            "beta": self.beta,
            "nu": self.nu,
            "finite_mass": self.finite_mass,
            "mass_plus": self.mass_plus,
            "mass_minus": self.mass_minus,
            "tail_plus": self.tail_plus,
            "tail_minus": self.tail_minus,
            "critical_gap": self.critical_gap,
        }
        if self.market is not None:
            out["market"] = self.market
        return out


@dataclass(frozen=True)
class ResidualReport:
    """Maximum residuals of a profile substituted into its stationary equations."""
    residual_plus: float
    residual_minus: float
    boundary_balance: float
    dr: float
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.residual_plus, self.residual_minus)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "residual_plus": self.residual_plus,
            "residual_minus": self.residual_minus,
            "boundary_balance": self.boundary_balance,
            "dr": self.dr,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class Infeasible:
    """The network inequality system has no positive solution."""
    iterations: int
    last_change: float
    norm: float
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "infeasible": True,
            "iterations": self.iterations,
            "last_change": self.last_change,
            "norm": self.norm,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class PhaseBudget:
    """Mass moved in or out of one phase during one step."""
    arrivals: float
    deaths: float
    outflow: float
    reinjected: float
    change: float

    @property
    def residual(self) -> float:
        return self.change - (self.arrivals - self.deaths - self.outflow + self.reinjected)

    @property
    def throughput(self) -> float:
        return self.arrivals + self.deaths + self.outflow + self.reinjected


@dataclass(frozen=True)
class MassBudget:
    """Per-step mass bookkeeping of both phases of one market."""
    plus: PhaseBudget
    minus: PhaseBudget

    @property
    def residual(self) -> float:
        return max(abs(self.plus.residual), abs(self.minus.residual))

    @property
    def throughput(self) -> float:
        return self.plus.throughput + self.minus.throughput


@dataclass(frozen=True)
class StepReport:
    """Event counts of one particle step."""
    arrivals_plus: int = 0
    arrivals_minus: int = 0
    deaths_plus: int = 0
    deaths_minus: int = 0
    annihilations: int = 0
    recycled_plus: int = 0
    recycled_minus: int = 0


@dataclass
class DensitySnapshot:
    """Binned densities of both phases at one time, r measured from b."""
    t: float
    edges: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray

    def rows(self) -> Iterator[Tuple[float, str, float, float]]:
        """(t, phase, r_bin, density) rows; r_bin is the bin's left edge."""
        for phase, rho in ((Phase.PLUS.value, self.rho_plus), (Phase.MINUS.value, self.rho_minus)):
            for left, value in zip(self.edges[:-1], rho):
                yield self.t, phase, float(left), float(value)


@dataclass
class SimTrajectory:
    """Observation record of one particle run."""
    seed: int
    times: List[float] = field(default_factory=list)
    b: List[float] = field(default_factory=list)
    n_plus: List[int] = field(default_factory=list)
    n_minus: List[int] = field(default_factory=list)
    events: List[Tuple[float, float]] = field(default_factory=list)
    empty_plus_episodes: List[Tuple[float, Optional[float]]] = field(default_factory=list)
    snapshots: List[DensitySnapshot] = field(default_factory=list)
    reports: List[StepReport] = field(default_factory=list)

    def rows(self) -> Iterator[Tuple[float, float, int, int]]:
        """(t, b, n_plus, n_minus) rows for CSV export."""
        return zip(self.times, self.b, self.n_plus, self.n_minus)

    @property
    def transaction_rate(self) -> float:
        """Annihilation events per unit time over the recorded horizon."""
        span = self.times[-1] - self.times[0] if len(self.times) > 1 else 0.0
        return len(self.events) / span if span > 0 else 0.0


@dataclass
class FluidSeries:
    """Boundary observables of one market recorded at every fluid step."""
    times: List[float] = field(default_factory=list)
    b: List[float] = field(default_factory=list)
    beta: List[float] = field(default_factory=list)
    nu: List[float] = field(default_factory=list)
    degenerate_steps: int = 0
    budget_residual: float = 0.0
    throughput: float = 0.0
    max_step_residual: float = 0.0

    def record(self, t: float, b: float, beta: float, nu: float, degenerate: bool,
               budget: Optional[MassBudget]) -> None:
        self.times.append(t)
        self.b.append(b)
        self.beta.append(beta)
        self.nu.append(nu)
        self.degenerate_steps += int(degenerate)
        if budget is not None:
            self.budget_residual += abs(budget.plus.residual) + abs(budget.minus.residual)
            self.throughput += budget.throughput
            self.max_step_residual = max(self.max_step_residual, budget.residual)

    def rows(self) -> Iterator[Tuple[float, float, float, float]]:
        """(t, b, beta, nu) rows for CSV export."""
        return zip(self.times, self.b, self.beta, self.nu)
