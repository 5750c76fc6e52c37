"""
Critical densities, fixed points and stationary points of one market.

Time-independent solutions of the moving-boundary equations satisfy, for
the (+)-phase with a = -v_plus,

    a rho_plus' = mu_plus rho_plus - lambda_plus - nu p(-,+)

and the same equation for the (-)-phase with speed v_minus. With
F(r) = int_0^r mu / speed the solution is

    rho(r) = exp(F(r)) * (gamma - (1/speed) int_0^r (lambda + nu p) exp(-F))

which stays nonnegative iff gamma is at least the critical density, and has
finite mass iff the bracket vanishes at infinity.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from ..config.constants import (
    BALANCE_RTOL,
    EPS_BOUNDARY,
    EPS_QUAD,
    FINITE_MASS_TOL,
    QUAD_TOL,
    R_MAX_MARGIN,
    THRESHOLD_BAND,
    EquilibriumKind,
    Phase,
)
from ..models.data import CompactRateFunction, MarketParams
from ..models.errors import (
    BelowCritical,
    KineticError,
    NegativeGamma,
    RecyclingTooStrong,
    RootSelectionAmbiguous,
)
from ..models.results import (
    CriticalConstants,
    EquilibriumProfile,
    NoFixedPoint,
    Reinjection,
    ResidualReport,
)
from ..utils.quadrature import cumulative_integral, integrate_pieces
from .fluid import boundary_velocity

logger = logging.getLogger(__name__)

DEFAULT_DR = 1e-3
RESIDUAL_TOL = 1e-5


def radial_grid(r_max: float, dr: float) -> np.ndarray:
    """Nodes 0, dr, 2 dr, ... up to the first node at or beyond r_max."""
    if dr <= 0.0 or r_max <= 0.0:
        raise ValueError(f"Need dr > 0 and r_max > 0, got dr={dr}, r_max={r_max}")
    n = int(math.ceil(r_max / dr - 1e-9))
    return np.arange(n + 1) * dr


def _breaks(*funcs: CompactRateFunction) -> Tuple[float, ...]:
    return tuple(sorted({x for f in funcs for x in f.breakpoints}))


def weighted_integral(
    f: CompactRateFunction,
    mu: CompactRateFunction,
    speed: float,
    tol: float = QUAD_TOL,
) -> float:
    """int_0^inf f(x) exp(-int_0^x mu / speed) dx, split at every breakpoint."""
    if f.is_zero:
        return 0.0
    end = f.support_radius
    nodes = [x for x in _breaks(f, mu) if x <= end]
    return integrate_pieces(
        lambda x: f(x) * math.exp(-mu.antiderivative(x) / speed), nodes, tol
    )


def critical_constants(
    params: MarketParams,
    dr: float = DEFAULT_DR,
    r_max: Optional[float] = None,
    tol: float = QUAD_TOL,
) -> CriticalConstants:
    """
    Compute the time-independent constants of a market.

    Args:
        params: Validated market parameters
        dr: Spacing of the F tabulation
        r_max: End of the F tabulation, defaults to the support radius
        tol: Quadrature tolerance

    Returns:
        CriticalConstants

    Raises:
        RecyclingTooStrong: If a recycling constant reaches 1
    """
    a, vm = -params.v_plus, params.v_minus
    lam_hat_plus = weighted_integral(params.lambda_plus, params.mu_plus, a, tol)
    lam_hat_minus = weighted_integral(params.lambda_minus, params.mu_minus, vm, tol)
    alpha_mp = weighted_integral(params.kernel_minus_plus(), params.mu_plus, a, tol)
    alpha_pm = weighted_integral(params.kernel_plus_minus(), params.mu_minus, vm, tol)
    if alpha_mp >= 1.0 or alpha_pm >= 1.0:
        raise RecyclingTooStrong(
            f"Recycling constants must stay below 1, got alpha_mp={alpha_mp:.6g}, "
            f"alpha_pm={alpha_pm:.6g}",
            alpha_mp=alpha_mp, alpha_pm=alpha_pm,
        )

    gamma_cr_plus = lam_hat_plus / a
    gamma_cr_minus = lam_hat_minus / vm
    r = radial_grid(r_max or params.support_radius, dr)
    return CriticalConstants(
        gamma_cr_plus=gamma_cr_plus,
        gamma_cr_minus=gamma_cr_minus,
        gamma_cr=max(gamma_cr_plus, vm * gamma_cr_minus / a),
        lambda_hat_plus=lam_hat_plus,
        lambda_hat_minus=lam_hat_minus,
        sigma_plus=a * gamma_cr_plus,
        sigma_minus=vm * gamma_cr_minus,
        alpha_mp=alpha_mp,
        alpha_pm=alpha_pm,
        gamma_hat_cr=max(gamma_cr_plus / (1.0 - alpha_mp),
                         vm * gamma_cr_minus / (a * (1.0 - alpha_pm))),
        r=r,
        F_plus=np.asarray(params.mu_plus.antiderivative(r)) / a,
        F_minus=np.asarray(params.mu_minus.antiderivative(r)) / vm,
    )


def _phase_density(
    r: np.ndarray,
    gamma: float,
    speed: float,
    lam: CompactRateFunction,
    mu: CompactRateFunction,
    reinjection: Reinjection,
    tol: float,
) -> Tuple[np.ndarray, float]:
    """Tabulated density of one phase and its limit as r -> inf."""
    sources = ((1.0, lam),) + tuple(reinjection)
    F = np.asarray(mu.antiderivative(r)) / speed
    accumulated = np.zeros_like(r)
    at_infinity = 0.0
    for weight, f in sources:
        if f.is_zero or weight == 0.0:
            continue
        g = cumulative_integral(
            lambda x, f=f: f(x) * math.exp(-mu.antiderivative(x) / speed),
            r, _breaks(f, mu), tol, support_end=f.support_radius,
        )
        accumulated = accumulated + weight * g
        at_infinity += weight * weighted_integral(f, mu, speed, tol)

    bracket = gamma - accumulated / speed
    if bracket.min() < -FINITE_MASS_TOL * max(1.0, gamma):
        raise NegativeGamma(
            f"Density bracket reaches {bracket.min():.3g} below zero for gamma={gamma:.12g}",
        )
    density = np.exp(F) * np.maximum(bracket, 0.0)
    tail_bracket = max(gamma - at_infinity / speed, 0.0)
    tail = math.exp(mu.total() / speed) * tail_bracket
    return density, tail


def build_profile(
    params: MarketParams,
    r: np.ndarray,
    gamma_plus: float,
    gamma_minus: float,
    beta: float,
    nu: float,
    kind: EquilibriumKind,
    reinjection_plus: Reinjection = (),
    reinjection_minus: Reinjection = (),
    critical_gap: float = 0.0,
    tol: float = QUAD_TOL,
    market: Optional[int] = None,
) -> EquilibriumProfile:
    """
    Tabulate both phases of an equilibrium from its boundary densities.

    Args:
        params: Market parameters (lambda, mu, v)
        r: Radial grid starting at 0
        gamma_plus: rho_plus(0)
        gamma_minus: rho_minus(0)
        beta: Boundary velocity of the equilibrium
        nu: Annihilation flow at the boundary
        kind: Fixed or stationary
        reinjection_plus: (weight, kernel) sources of the (+)-phase
        reinjection_minus: (weight, kernel) sources of the (-)-phase
        critical_gap: |gamma_cr_plus - gamma_cr_minus|
        tol: Quadrature tolerance
        market: Market index inside a network

    Returns:
        EquilibriumProfile with masses and tail densities
    """
    rho_plus, tail_plus = _phase_density(
        r, gamma_plus, -params.v_plus, params.lambda_plus, params.mu_plus,
        reinjection_plus, tol,
    )
    rho_minus, tail_minus = _phase_density(
        r, gamma_minus, params.v_minus, params.lambda_minus, params.mu_minus,
        reinjection_minus, tol,
    )
    finite = tail_plus <= FINITE_MASS_TOL and tail_minus <= FINITE_MASS_TOL
    if finite and r[-1] < params.support_radius:
        logger.warning("Grid ends at %.3g before the support radius %.3g; masses are truncated",
                       r[-1], params.support_radius)
    return EquilibriumProfile(
        kind=kind,
        r=r,
        rho_plus=rho_plus,
        rho_minus=rho_minus,
        gamma_plus=gamma_plus,
        gamma_minus=gamma_minus,
        beta=beta,
        nu=nu,
        mass_plus=float(trapezoid(rho_plus, r)) if finite else math.inf,
        mass_minus=float(trapezoid(rho_minus, r)) if finite else math.inf,
        tail_plus=tail_plus,
        tail_minus=tail_minus,
        finite_mass=finite,
        critical_gap=critical_gap,
        reinjection_plus=tuple(reinjection_plus),
        reinjection_minus=tuple(reinjection_minus),
        market=market,
    )


def profile_grid(params: MarketParams, dr: float, r_max: Optional[float]) -> np.ndarray:
    return radial_grid(r_max or params.support_radius + R_MAX_MARGIN, dr)


def fixed_point_single(
    params: MarketParams,
    gamma_plus: float,
    dr: float = DEFAULT_DR,
    r_max: Optional[float] = None,
    tol: float = QUAD_TOL,
) -> Union[EquilibriumProfile, NoFixedPoint]:
    """
    Fixed point (beta = 0) of a market without recycling.

    Args:
        params: Market parameters; recycling kernels are ignored
        gamma_plus: Boundary density rho_plus(0) >= 0
        dr: Grid spacing of the tabulation
        r_max: End of the tabulation
        tol: Quadrature tolerance

    Returns:
        EquilibriumProfile, or NoFixedPoint when gamma_plus < gamma_cr
    """
    if gamma_plus < 0.0:
        raise ValueError(f"gamma_plus must be nonnegative, got {gamma_plus}")
    params = params.without_recycling()
    consts = critical_constants(params, dr, tol=tol)
    if gamma_plus < consts.gamma_cr - THRESHOLD_BAND:
        logger.info("No fixed point: gamma_plus=%.6g below gamma_cr=%.6g", gamma_plus, consts.gamma_cr)
        return NoFixedPoint(consts.gamma_cr, gamma_plus)

    nu = -params.v_plus * gamma_plus
    return build_profile(
        params, profile_grid(params, dr, r_max),
        gamma_plus, nu / params.v_minus, 0.0, nu, EquilibriumKind.FIXED,
        critical_gap=consts.critical_gap, tol=tol,
    )


def stationary_point_single(
    params: MarketParams,
    gamma_plus: float,
    gamma_minus: float,
    dr: float = DEFAULT_DR,
    r_max: Optional[float] = None,
    tol: float = QUAD_TOL,
) -> EquilibriumProfile:
    """
    Stationary point of a market without recycling.

    Raises:
        BelowCritical: If a boundary density is below its critical value
    """
    params = params.without_recycling()
    consts = critical_constants(params, dr, tol=tol)
    for phase, gamma, critical in ((Phase.PLUS, gamma_plus, consts.gamma_cr_plus),
                                   (Phase.MINUS, gamma_minus, consts.gamma_cr_minus)):
        if gamma < critical - THRESHOLD_BAND:
            raise BelowCritical(
                f"gamma_{phase.value}={gamma:.12g} is below the critical density {critical:.12g}",
                phase=phase.value, critical=critical,
            )

    beta, degenerate = boundary_velocity(gamma_plus, gamma_minus, params.v_plus, params.v_minus)
    if degenerate:
        logger.warning("Both boundary densities vanish; stationary velocity set to %.6g", beta)
    nu = (params.v_minus - beta) * gamma_minus
    return build_profile(
        params, profile_grid(params, dr, r_max),
        gamma_plus, gamma_minus, beta, nu, EquilibriumKind.STATIONARY,
        critical_gap=consts.critical_gap, tol=tol,
    )


def _recycling_sources(params: MarketParams, nu: float) -> Tuple[Reinjection, Reinjection]:
    plus = ((nu, params.p_minus_plus),) if params.p_minus_plus is not None else ()
    minus = ((nu, params.p_plus_minus),) if params.p_plus_minus is not None else ()
    return plus, minus


def fixed_point_recycling(
    params: MarketParams,
    gamma_plus: float,
    dr: float = DEFAULT_DR,
    r_max: Optional[float] = None,
    tol: float = QUAD_TOL,
) -> Union[EquilibriumProfile, NoFixedPoint]:
    """
    Fixed point of a market whose annihilated mass is partly reinjected.

    Returns:
        EquilibriumProfile, or NoFixedPoint when gamma_plus < gamma_hat_cr

    Raises:
        RecyclingTooStrong: If a recycling constant reaches 1
    """
    if gamma_plus < 0.0:
        raise ValueError(f"gamma_plus must be nonnegative, got {gamma_plus}")
    consts = critical_constants(params, dr, tol=tol)
    if gamma_plus < consts.gamma_hat_cr - THRESHOLD_BAND:
        logger.info("No fixed point: gamma_plus=%.6g below gamma_hat_cr=%.6g",
                    gamma_plus, consts.gamma_hat_cr)
        return NoFixedPoint(consts.gamma_hat_cr, gamma_plus, "gamma_hat_cr")

    nu = -params.v_plus * gamma_plus
    plus, minus = _recycling_sources(params, nu)
    return build_profile(
        params, profile_grid(params, dr, r_max),
        gamma_plus, nu / params.v_minus, 0.0, nu, EquilibriumKind.FIXED,
        plus, minus, consts.critical_gap, tol,
    )


@dataclass(frozen=True)
class BoundaryRoot:
    """Admissible root of the stationary boundary-velocity equation."""
    beta: float
    branch: str
    residual: float
    coefficients: Tuple[float, float, float]


def _quadratic(coeffs: Sequence[float], x: float) -> float:
    a, b, c = coeffs
    return (a * x + b) * x + c


def solve_boundary_quadratic(
    sigma_plus: float,
    sigma_minus: float,
    alpha_mp: float,
    alpha_pm: float,
    v_plus: float,
    v_minus: float,
) -> BoundaryRoot:
    """
    Solve the boundary balance of a stationary recycling market for beta.

    Equating (v_minus - beta) gamma_minus with (beta - v_plus) gamma_plus,
    where gamma_plus = sigma_plus / (-v_plus (1 - alpha_mp) - beta alpha_mp)
    and gamma_minus = sigma_minus / (v_minus (1 - alpha_pm) + beta alpha_pm),
    gives A beta^2 + B beta + C = 0 with L = sigma_plus alpha_pm - sigma_minus alpha_mp:

        A = -L
        B = L (v_plus + v_minus) + sigma_minus v_plus - sigma_plus v_minus
        C = -L v_plus v_minus - v_plus v_minus (sigma_minus - sigma_plus)

    The equation is linear when L vanishes relative to its terms. Only
    roots in (v_plus, v_minus) with both denominators positive are
    admissible; the balance is strictly decreasing there, so exactly one
    exists. The other root of the quadratic may still lie in
    (v_plus, v_minus) beyond a pole.

    Returns:
        BoundaryRoot with the unique admissible root

    Raises:
        RootSelectionAmbiguous: If zero or two roots are admissible
    """
    lead = sigma_plus * alpha_pm - sigma_minus * alpha_mp
    coeffs = (
        -lead,
        lead * (v_plus + v_minus) + sigma_minus * v_plus - sigma_plus * v_minus,
        -lead * v_plus * v_minus - v_plus * v_minus * (sigma_minus - sigma_plus),
    )
    A, B, C = coeffs
    scale = max(1.0, abs(A), abs(B), abs(C))
    if A == 0.0 and B == 0.0 and C == 0.0:
        raise RootSelectionAmbiguous("Boundary equation vanishes identically; every beta balances")

    if abs(lead) > EPS_QUAD * max(abs(sigma_plus * alpha_pm), abs(sigma_minus * alpha_mp), 1.0):
        branch = "quadratic"
        disc = B * B - 4.0 * A * C
        if disc < 0.0:
            if disc < -EPS_QUAD * B * B:
                raise RootSelectionAmbiguous(f"Boundary quadratic has no real root (disc={disc:.3g})")
            disc = 0.0
        q = -0.5 * (B + math.copysign(math.sqrt(disc), B))
        roots = [q / A]
        if q != 0.0:
            roots.append(C / q)
    else:
        branch = "linear"
        logger.warning("Boundary equation is linear (leading term %.3g); using the linear root", lead)
        if B == 0.0:
            raise RootSelectionAmbiguous("Linear boundary equation has zero slope")
        roots = [-C / B]

    polished = []
    for x in roots:
        slope = 2.0 * A * x + B
        if slope != 0.0:
            x -= _quadratic(coeffs, x) / slope
        polished.append(x)

    lo, hi = v_plus, v_minus
    if alpha_pm > 0.0:
        lo = max(lo, -v_minus * (1.0 - alpha_pm) / alpha_pm)
    if alpha_mp > 0.0:
        hi = min(hi, -v_plus * (1.0 - alpha_mp) / alpha_mp)
    eps = EPS_BOUNDARY * (v_minus - v_plus)
    admissible = [x for x in polished if lo + eps < x < hi - eps]
    if len(admissible) != 1:
        raise RootSelectionAmbiguous(
            f"{len(admissible)} admissible roots in ({lo:.12g}, {hi:.12g}): {polished}",
            branch=branch,
        )
    beta = admissible[0]
    return BoundaryRoot(beta, branch, abs(_quadratic(coeffs, beta)) / scale, coeffs)


def stationary_point_recycling(
    params: MarketParams,
    dr: float = DEFAULT_DR,
    r_max: Optional[float] = None,
    tol: float = QUAD_TOL,
) -> EquilibriumProfile:
    """
    The unique finite-mass stationary point of a recycling market.

    Raises:
        RootSelectionAmbiguous: If the boundary equation is ill-conditioned
        NegativeGamma: If a boundary density comes out nonpositive
    """
    consts = critical_constants(params, dr, tol=tol)
    root = solve_boundary_quadratic(
        consts.sigma_plus, consts.sigma_minus, consts.alpha_mp, consts.alpha_pm,
        params.v_plus, params.v_minus,
    )
    beta = root.beta
    a, vm = -params.v_plus, params.v_minus
    gamma_plus = consts.sigma_plus / (a * (1.0 - consts.alpha_mp) - beta * consts.alpha_mp)
    gamma_minus = consts.sigma_minus / (vm * (1.0 - consts.alpha_pm) + beta * consts.alpha_pm)
    if not (gamma_plus > 0.0 and gamma_minus > 0.0):
        raise NegativeGamma(
            f"Stationary boundary densities must be positive, got gamma_plus={gamma_plus:.6g}, "
            f"gamma_minus={gamma_minus:.6g}",
            beta=beta,
        )

    nu = (vm - beta) * gamma_minus
    nu_plus = (beta - params.v_plus) * gamma_plus
    if abs(nu - nu_plus) > BALANCE_RTOL * max(abs(nu), abs(nu_plus)):
        raise KineticError(
            f"Boundary balance fails: {nu:.15g} vs {nu_plus:.15g}",
            error_type="BALANCE_VIOLATED", beta=beta,
        )
    logger.debug("Stationary recycling point: beta=%.12g via %s branch", beta, root.branch)
    plus, minus = _recycling_sources(params, nu)
    return build_profile(
        params, profile_grid(params, dr, r_max),
        gamma_plus, gamma_minus, beta, nu, EquilibriumKind.STATIONARY,
        plus, minus, consts.critical_gap, tol,
    )


def _cell_integrals_of_product(
    mu: CompactRateFunction, r: np.ndarray, rho: np.ndarray
) -> np.ndarray:
    """Per-cell int mu * rho with rho linear between grid nodes, exact."""
    inner = [x for x in mu.breakpoints if r[0] < x < r[-1]]
    nodes = np.union1d(r, inner)
    rho_n = np.interp(nodes, r, rho)
    mu_n = np.asarray(mu(nodes), dtype=float)
    h = np.diff(nodes)
    panels = h / 6.0 * (
        2.0 * mu_n[:-1] * rho_n[:-1] + mu_n[:-1] * rho_n[1:]
        + mu_n[1:] * rho_n[:-1] + 2.0 * mu_n[1:] * rho_n[1:]
    )
    cell = np.clip(np.searchsorted(r, nodes[:-1], side="right") - 1, 0, r.size - 2)
    return np.bincount(cell, weights=panels, minlength=r.size - 1)


def _cell_increments(f: CompactRateFunction, r: np.ndarray) -> np.ndarray:
    return np.diff(np.asarray(f.antiderivative(r), dtype=float))


def _phase_residual(
    r: np.ndarray,
    rho: np.ndarray,
    speed: float,
    lam: CompactRateFunction,
    mu: CompactRateFunction,
    reinjection: Iterable[Tuple[float, CompactRateFunction]],
) -> float:
    dr = np.diff(r)
    balance = speed * np.diff(rho) - _cell_integrals_of_product(mu, r, rho)
    balance += _cell_increments(lam, r)
    for weight, kernel in reinjection:
        balance += weight * _cell_increments(kernel, r)
    return float(np.max(np.abs(balance / dr)))


def verify_equilibrium(
    profile: EquilibriumProfile,
    params: MarketParams,
    tol: float = RESIDUAL_TOL,
) -> ResidualReport:
    """
    Substitute a tabulated profile into its stationary equations.

    Each equation is integrated over every grid cell and divided by the
    cell width, which is a staggered central difference of the derivative
    term with exact source integrals. The boundary balance
    (v_minus - beta) rho_minus(0) + (v_plus - beta) rho_plus(0) is reported
    separately.

    Args:
        profile: Tabulated equilibrium
        params: Market parameters the profile was built from
        tol: Threshold on the maximum equation residual

    Returns:
        ResidualReport
    """
    r = profile.r
    residual_plus = _phase_residual(
        r, profile.rho_plus, -params.v_plus, params.lambda_plus, params.mu_plus,
        profile.reinjection_plus,
    )
    residual_minus = _phase_residual(
        r, profile.rho_minus, params.v_minus, params.lambda_minus, params.mu_minus,
        profile.reinjection_minus,
    )
    beta = profile.beta
    balance = abs((params.v_minus - beta) * profile.rho_minus[0]
                  + (params.v_plus - beta) * profile.rho_plus[0])
    return ResidualReport(residual_plus, residual_minus, float(balance), profile.dr, tol)
