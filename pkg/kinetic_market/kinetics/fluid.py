"""
Moving-boundary fluid solver in the comoving radial coordinate.

Both phases live on a cell-centred grid r in [0, R_max] measured from the
boundary b(t). In that frame every particle drifts toward r = 0:
(+) mass with speed beta - v_plus, (-) mass with speed v_minus - beta.
Mass reaching the face r = 0 annihilates. Beta balances the two flows,

    rho_plus(0) (beta - v_plus) = rho_minus(0) (v_minus - beta),

and b advances by beta * dt. Advection is first-order upwind with explicit
sources; the scheme is conservative, so every step carries an exact mass
budget.
"""

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..config.constants import (
    BISECTION_TOL,
    CFL_LIMIT,
    EPS_BOUNDARY,
    MAX_BISECTION_STEPS,
    Phase,
)
from ..models.data import CompactRateFunction, InitialDensity, MarketParams, NetworkSpec, VelocityProfile
from ..models.errors import CflViolation, NoMassAtBoundary
from ..models.results import EquilibriumProfile, FluidSeries, MassBudget, PhaseBudget
from ..utils.quadrature import integrate_pieces

logger = logging.getLogger(__name__)


def boundary_velocity(
    rho_plus_0: float,
    rho_minus_0: float,
    v_plus: float,
    v_minus: float,
) -> Tuple[float, bool]:
    """
    Boundary velocity balancing the annihilation flows of both phases.

    Args:
        rho_plus_0: (+) density at the boundary
        rho_minus_0: (-) density at the boundary
        v_plus: (+) velocity, negative
        v_minus: (-) velocity, positive

    Returns:
        (beta, degenerate); degenerate is True when both densities are
        below EPS_BOUNDARY and beta falls back to the midpoint velocity
    """
    total = rho_plus_0 + rho_minus_0
    if total < EPS_BOUNDARY:
        return 0.5 * (v_plus + v_minus), True
    return (rho_plus_0 * v_plus + rho_minus_0 * v_minus) / total, False


def boundary_fluxes(fp: VelocityProfile, fm: VelocityProfile, beta: float) -> Tuple[float, float]:
    """
    Mass flows into a boundary moving with velocity beta.

    M_plus = int_{v < beta} fp(v) (beta - v) dv and
    M_minus = int_{v > beta} fm(v) (v - beta) dv. The integrands are
    piecewise quadratic, so panel-wise Simpson is exact.
    """
    plus_nodes = [v for v in fp.velocities if v < beta]
    minus_nodes = [v for v in fm.velocities if v > beta]
    m_plus = integrate_pieces(lambda v: fp(v) * (beta - v), plus_nodes + [beta]) if plus_nodes else 0.0
    m_minus = integrate_pieces(lambda v: fm(v) * (v - beta), [beta] + minus_nodes) if minus_nodes else 0.0
    return m_plus, m_minus


def boundary_velocity_general(fp: VelocityProfile, fm: VelocityProfile) -> float:
    """
    Boundary velocity for velocity-distributed phases.

    g(beta) = M_plus(beta) - M_minus(beta) is nondecreasing on [-V0, V0]
    with g(-V0) <= 0 <= g(V0). Its zero set is an interval. When the
    (+)-profile carries mass the largest zero is returned, not the
    smallest: that is the velocity at which the (+) flux starts, so a
    flat stretch of g below the (+) support is skipped. Without (+) mass
    the smallest zero is returned. For delta-like profiles this
    reproduces boundary_velocity.

    Raises:
        NoMassAtBoundary: If both profiles vanish identically
    """
    if fp.is_zero and fm.is_zero:
        raise NoMassAtBoundary("Both boundary profiles are identically zero")
    v_bound = max(fp.v_bound, fm.v_bound)

    def g(beta: float) -> float:
        m_plus, m_minus = boundary_fluxes(fp, fm, beta)
        return m_plus - m_minus

    largest = not fp.is_zero
    lo, hi = -v_bound, v_bound
    for _ in range(MAX_BISECTION_STEPS):
        if hi - lo <= BISECTION_TOL * v_bound:
            break
        mid = 0.5 * (lo + hi)
        value = g(mid)
        if value < 0.0 or (largest and value == 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FluidState:
    """
    Cell-averaged densities of one market on the comoving grid.

    Cell i covers [i dr, (i + 1) dr]. ``beta``, ``nu`` and ``budget`` refer
    to the step that produced the state.
    """
    dr: float
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    b: float = 0.0
    beta: float = 0.0
    t: float = 0.0
    nu: float = 0.0
    degenerate: bool = False
    budget: Optional[MassBudget] = field(default=None, compare=False)

    @property
    def r(self) -> np.ndarray:
        """Cell centres."""
        return (np.arange(self.rho_plus.size) + 0.5) * self.dr

    @property
    def r_max(self) -> float:
        return self.rho_plus.size * self.dr

    @staticmethod
    def _centres(dr: float, r_max: float) -> np.ndarray:
        n = int(math.ceil(r_max / dr - 1e-9))
        return (np.arange(n) + 0.5) * dr

    @classmethod
    def from_initial(cls, init: InitialDensity, dr: float, r_max: float) -> "FluidState":
        """Sample initial density tabulations at cell centres."""
        r = cls._centres(dr, r_max)
        return cls(dr, np.asarray(init.rho_plus(r), dtype=float),
                   np.asarray(init.rho_minus(r), dtype=float), b=init.b0)

    @classmethod
    def from_profile(cls, profile: EquilibriumProfile, dr: float, r_max: float,
                     b0: float = 0.0) -> "FluidState":
        """Start at an equilibrium; densities beyond its grid keep their last value."""
        r = cls._centres(dr, r_max)
        return cls(
            dr,
            np.interp(r, profile.r, profile.rho_plus),
            np.interp(r, profile.r, profile.rho_minus),
            b=b0, beta=profile.beta, nu=profile.nu,
        )

    def masses(self) -> Tuple[float, float]:
        return float(self.rho_plus.sum() * self.dr), float(self.rho_minus.sum() * self.dr)

    def lab_positions(self) -> Tuple[np.ndarray, np.ndarray]:
        """Price coordinates of the cell centres: b + r for (+), b - r for (-)."""
        r = self.r
        return self.b + r, self.b - r

    def rows(self) -> Iterator[Tuple[float, float, float, str, float, float]]:
        """(t, b, beta, phase, r, rho) rows for snapshot CSV export."""
        r = self.r
        for phase, rho in ((Phase.PLUS.value, self.rho_plus), (Phase.MINUS.value, self.rho_minus)):
            for ri, value in zip(r, rho):
                yield self.t, self.b, self.beta, phase, float(ri), float(value)


@dataclass(frozen=True)
class NetworkFluidState:
    """One FluidState per market, advanced in lockstep."""
    markets: Tuple[FluidState, ...]
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "markets", tuple(self.markets))


def _boundary_densities(state: FluidState, extrapolate: bool) -> Tuple[float, float]:
    if not extrapolate or state.rho_plus.size < 2:
        return float(state.rho_plus[0]), float(state.rho_minus[0])

    def edge(rho: np.ndarray) -> float:
        return max(1.5 * rho[0] - 0.5 * rho[1], 0.0)

    return edge(state.rho_plus), edge(state.rho_minus)


def annihilation_flux(state: FluidState, params: MarketParams, extrapolate: bool = False) -> float:
    """Annihilation flow nu = (v_minus - beta) rho_minus(0) at the current densities."""
    bp, bm = _boundary_densities(state, extrapolate)
    beta, _ = boundary_velocity(bp, bm, params.v_plus, params.v_minus)
    return (params.v_minus - beta) * bm


@dataclass(frozen=True)
class _BoundaryTerms:
    beta: float
    degenerate: bool
    rho_plus: float
    rho_minus: float
    nu_plus: float
    nu_minus: float


def _boundary_terms(state: FluidState, params: MarketParams, extrapolate: bool) -> _BoundaryTerms:
    bp, bm = _boundary_densities(state, extrapolate)
    beta, degenerate = boundary_velocity(bp, bm, params.v_plus, params.v_minus)
    return _BoundaryTerms(beta, degenerate, bp, bm,
                          (beta - params.v_plus) * bp, (params.v_minus - beta) * bm)


def _advect_phase(
    rho: np.ndarray,
    speed: float,
    boundary: float,
    lam: np.ndarray,
    mu: np.ndarray,
    source: np.ndarray,
    dt: float,
    dr: float,
) -> Tuple[np.ndarray, PhaseBudget]:
    inflow = np.empty_like(rho)
    inflow[:-1] = speed * rho[1:]
    inflow[-1] = 0.0
    outflow = speed * rho
    outflow[0] = speed * boundary
    decay = mu * rho
    updated = rho + dt / dr * (inflow - outflow) - dt * decay + dt * lam + dt * source
    budget = PhaseBudget(
        arrivals=dt * dr * float(lam.sum()),
        deaths=dt * dr * float(decay.sum()),
        outflow=dt * speed * boundary,
        reinjected=dt * dr * float(source.sum()),
        change=dr * (float(updated.sum()) - float(rho.sum())),
    )
    return updated, budget


def _check_cfl(speed: float, mu_max: float, dt: float, dr: float, extrapolate: bool,
               market: Optional[int]) -> None:
    courant = speed * dt / dr
    if courant > CFL_LIMIT:
        raise CflViolation(
            f"Advection speed {speed:.6g} with dt={dt:.3g} exceeds {CFL_LIMIT}*dr (dr={dr:.3g})",
            market=market,
        )
    if dt * mu_max > CFL_LIMIT:
        raise CflViolation(f"dt*max(mu) = {dt * mu_max:.3g} exceeds {CFL_LIMIT}", market=market)
    weight = 1.5 if extrapolate else 1.0
    if weight * courant + dt * mu_max > 1.0:
        raise CflViolation(
            f"Step dt={dt:.3g} can turn densities negative (courant {courant:.3g}, "
            f"dt*max(mu) {dt * mu_max:.3g})",
            market=market,
        )


def _advance(
    state: FluidState,
    params: MarketParams,
    dt: float,
    terms: _BoundaryTerms,
    source_plus: np.ndarray,
    source_minus: np.ndarray,
    extrapolate: bool,
    market: Optional[int] = None,
) -> FluidState:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    r = state.r
    speed_plus = terms.beta - params.v_plus
    speed_minus = params.v_minus - terms.beta
    mu_plus = np.asarray(params.mu_plus(r), dtype=float)
    mu_minus = np.asarray(params.mu_minus(r), dtype=float)
    _check_cfl(max(speed_plus, speed_minus), max(mu_plus.max(), mu_minus.max()),
               dt, state.dr, extrapolate, market)

    rho_plus, budget_plus = _advect_phase(
        state.rho_plus, speed_plus, terms.rho_plus,
        np.asarray(params.lambda_plus(r), dtype=float), mu_plus, source_plus, dt, state.dr,
    )
    rho_minus, budget_minus = _advect_phase(
        state.rho_minus, speed_minus, terms.rho_minus,
        np.asarray(params.lambda_minus(r), dtype=float), mu_minus, source_minus, dt, state.dr,
    )
    if terms.degenerate:
        logger.debug("Degenerate boundary at t=%.6g (market %s)", state.t, market)
    return FluidState(
        dr=state.dr,
        rho_plus=rho_plus,
        rho_minus=rho_minus,
        b=state.b + terms.beta * dt,
        beta=terms.beta,
        t=state.t + dt,
        nu=terms.nu_minus,
        degenerate=terms.degenerate,
        budget=MassBudget(budget_plus, budget_minus),
    )


def step_recycling(state: FluidState, params: MarketParams, dt: float,
                   extrapolate: bool = False) -> FluidState:
    """
    Advance a recycling market by dt.

    Annihilated (-) mass re-enters the (+)-phase with density
    nu_minus * p(-,+,r) and annihilated (+) mass the (-)-phase with
    nu_plus * p(+,-,r), both from start-of-step boundary densities.

    Raises:
        CflViolation: If the step is not stable
    """
    terms = _boundary_terms(state, params, extrapolate)
    r = state.r
    source_plus = terms.nu_minus * np.asarray(params.kernel_minus_plus()(r), dtype=float)
    source_minus = terms.nu_plus * np.asarray(params.kernel_plus_minus()(r), dtype=float)
    return _advance(state, params, dt, terms, source_plus, source_minus, extrapolate)


def step_single(state: FluidState, params: MarketParams, dt: float,
                extrapolate: bool = False) -> FluidState:
    """
    Advance a market without recycling by dt.

    Raises:
        CflViolation: If the step is not stable
    """
    return step_recycling(state, params.without_recycling(), dt, extrapolate)


def _routed_source(
    r: np.ndarray,
    flows: Sequence[float],
    kernels: Sequence[Optional[CompactRateFunction]],
) -> np.ndarray:
    source = np.zeros_like(r)
    for k, kernel in enumerate(kernels):
        if kernel is not None:
            source = source + flows[k] * np.asarray(kernel(r), dtype=float)
    return source


def step_network(
    state: NetworkFluidState,
    spec: NetworkSpec,
    dt: float,
    extrapolate: bool = False,
    executor: Optional[Executor] = None,
) -> NetworkFluidState:
    """
    Advance every market of a network by dt.

    Routing sources use start-of-step boundary densities of all markets, so
    markets can be advanced in any order or in parallel with identical
    results.

    Args:
        state: Network state
        spec: Network parameters and routing kernels
        dt: Time step
        extrapolate: Use two-cell boundary extrapolation
        executor: Optional executor to advance markets concurrently

    Raises:
        CflViolation: Tagged with the offending market
    """
    terms = [
        _boundary_terms(market_state, params, extrapolate)
        for market_state, params in zip(state.markets, spec.markets)
    ]
    nu_minus = [t.nu_minus for t in terms]
    nu_plus = [t.nu_plus for t in terms]

    def advance(m: int) -> FluidState:
        market_state = state.markets[m]
        r = market_state.r
        into_plus = [spec.routing_minus_plus.get((k, m)) for k in range(spec.size)]
        into_minus = [spec.routing_plus_minus.get((k, m)) for k in range(spec.size)]
        return _advance(
            market_state, spec.markets[m], dt, terms[m],
            _routed_source(r, nu_minus, into_plus),
            _routed_source(r, nu_plus, into_minus),
            extrapolate, market=m,
        )

    indices = range(spec.size)
    if executor is not None:
        markets = list(executor.map(advance, indices))
    else:
        markets = [advance(m) for m in indices]
    return NetworkFluidState(tuple(markets), state.t + dt)


def _step_count(T: float, dt: float) -> Tuple[int, float]:
    if T <= 0.0:
        return 0, dt
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    return n, T / n


def run_fluid(
    state: FluidState,
    params: MarketParams,
    T: float,
    dt: float,
    extrapolate: bool = False,
    sample_every: int = 0,
) -> Tuple[FluidState, FluidSeries, List[FluidState]]:
    """
    Integrate one market over [t, t + T].

    The step is shortened so that T is reached exactly. Recycling kernels
    are used when present.

    Args:
        state: Initial state
        params: Market parameters
        T: Horizon
        dt: Time step bound
        extrapolate: Use two-cell boundary extrapolation
        sample_every: Keep every n-th state as a snapshot (0 keeps none)

    Returns:
        (final state, per-step series, snapshots)
    """
    steps, h = _step_count(T, dt)
    series = FluidSeries()
    snapshots = [state] if sample_every else []
    degenerate_logged = False
    for n in range(1, steps + 1):
        state = step_recycling(state, params, h, extrapolate)
        series.record(state.t, state.b, state.beta, state.nu, state.degenerate, state.budget)
        if state.degenerate and not degenerate_logged:
            logger.warning("Boundary densities vanished at t=%.6g; beta set to the midpoint velocity",
                           state.t)
            degenerate_logged = True
        if sample_every and n % sample_every == 0:
            snapshots.append(state)
    logger.debug("run_fluid: %d steps of %.3g, final b=%.6g", steps, h, state.b)
    return state, series, snapshots


def run_network(
    state: NetworkFluidState,
    spec: NetworkSpec,
    T: float,
    dt: float,
    extrapolate: bool = False,
    sample_every: int = 0,
    executor: Optional[Executor] = None,
) -> Tuple[NetworkFluidState, List[FluidSeries], List[NetworkFluidState]]:
    """Integrate a network over [t, t + T]; one series per market."""
    steps, h = _step_count(T, dt)
    series = [FluidSeries() for _ in range(spec.size)]
    snapshots = [state] if sample_every else []
    for n in range(1, steps + 1):
        state = step_network(state, spec, h, extrapolate, executor)
        for record, market_state in zip(series, state.markets):
            record.record(market_state.t, market_state.b, market_state.beta, market_state.nu,
                          market_state.degenerate, market_state.budget)
        if sample_every and n % sample_every == 0:
            snapshots.append(state)
    return state, series, snapshots
