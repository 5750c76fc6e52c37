"""
Fixed points of a network of markets linked by routing kernels.

A fixed point of the network is parameterised by the annihilation flows
s_m = -v_plus_m rho_plus_m(0). Nonnegative densities exist iff s solves

    s >= lambda_hat_plus + s A_mp,    s >= lambda_hat_minus + s A_pm,

where A_mp[k, m] is the weighted mass that market k routes from its
annihilations into the (+)-phase of market m, and likewise A_pm.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from ..config.constants import (
    DIVERGENCE_BOUND,
    EPS_POS,
    INEQ_TOL,
    MAX_ITERATIONS,
    QUAD_TOL,
    EquilibriumKind,
)
from ..models.data import NetworkSpec
from ..models.errors import InequalitiesViolated, SubstochasticityViolated
from ..models.results import EquilibriumProfile, Infeasible
from .equilibria import DEFAULT_DR, profile_grid, build_profile, weighted_integral

logger = logging.getLogger(__name__)

# Change in sup norm below which the monotone iteration has converged
CONVERGENCE_TOL = 1e-12
ROW_SUM_SLACK = 1e-12


@dataclass(frozen=True)
class NetworkConstants:
    """Per-market arrival constants and the weighted routing matrices."""
    lambda_hat_plus: np.ndarray
    lambda_hat_minus: np.ndarray
    A_mp: np.ndarray
    A_pm: np.ndarray

    def to_dict(self):
        return {
            "lambda_hat_plus": self.lambda_hat_plus.tolist(),
            "lambda_hat_minus": self.lambda_hat_minus.tolist(),
            "A_mp": self.A_mp.tolist(),
            "A_pm": self.A_pm.tolist(),
        }


def _check_substochastic(name: str, matrix: np.ndarray) -> None:
    rows = matrix.sum(axis=1)
    if np.any(rows > 1.0 + ROW_SUM_SLACK):
        worst = int(np.argmax(rows))
        raise SubstochasticityViolated(
            f"{name} row {worst} sums to {rows[worst]:.12g} > 1", matrix=name, row=worst,
        )
    if rows.size and not np.any(rows < 1.0):
        raise SubstochasticityViolated(f"{name} has no row summing to less than 1", matrix=name)


def network_constants(spec: NetworkSpec, tol: float = QUAD_TOL) -> NetworkConstants:
    """
    Compute lambda_hat per market and the routing matrices.

    Entries use the destination market's exponent: A_mp[k, m] is
    int p_km(-,+,x) exp(-F_plus_m(x)) dx.

    Raises:
        SubstochasticityViolated: If a matrix has a row sum above 1 or no
            row strictly below 1
    """
    n = spec.size
    lam_plus = np.zeros(n)
    lam_minus = np.zeros(n)
    A_mp = np.zeros((n, n))
    A_pm = np.zeros((n, n))
    for m, market in enumerate(spec.markets):
        a, vm = -market.v_plus, market.v_minus
        lam_plus[m] = weighted_integral(market.lambda_plus, market.mu_plus, a, tol)
        lam_minus[m] = weighted_integral(market.lambda_minus, market.mu_minus, vm, tol)
        for k in range(n):
            A_mp[k, m] = weighted_integral(spec.kernel_minus_plus(k, m), market.mu_plus, a, tol)
            A_pm[k, m] = weighted_integral(spec.kernel_plus_minus(k, m), market.mu_minus, vm, tol)
    _check_substochastic("A_mp", A_mp)
    _check_substochastic("A_pm", A_pm)
    return NetworkConstants(lam_plus, lam_minus, A_mp, A_pm)


def _violations(s: np.ndarray, lam_plus, lam_minus, A_mp, A_pm) -> Tuple[np.ndarray, np.ndarray]:
    return s - (lam_plus + s @ A_mp), s - (lam_minus + s @ A_pm)


def _polish(s: np.ndarray, lam_plus, lam_minus, A_mp, A_pm, floor: np.ndarray) -> Optional[np.ndarray]:
    """Solve the linear system of the active inequalities exactly."""
    first = lam_plus + s @ A_mp
    second = lam_minus + s @ A_pm
    n = s.size
    B = np.zeros((n, n))
    c = np.zeros(n)
    for m in range(n):
        if first[m] >= second[m] and first[m] >= floor[m]:
            B[:, m], c[m] = A_mp[:, m], lam_plus[m]
        elif second[m] >= floor[m]:
            B[:, m], c[m] = A_pm[:, m], lam_minus[m]
        else:
            c[m] = floor[m]
    try:
        exact = np.linalg.solve((np.eye(n) - B).T, c)
    except np.linalg.LinAlgError:
        return None
    slack_plus, slack_minus = _violations(exact, lam_plus, lam_minus, A_mp, A_pm)
    scale = INEQ_TOL * max(1.0, float(np.max(np.abs(exact))))
    if np.all(exact > 0.0) and slack_plus.min() >= -scale and slack_minus.min() >= -scale:
        return exact
    return None


def solve_network_inequalities(
    lambda_hat_plus: np.ndarray,
    lambda_hat_minus: np.ndarray,
    A_mp: np.ndarray,
    A_pm: np.ndarray,
    max_iterations: int = MAX_ITERATIONS,
) -> Union[np.ndarray, Infeasible]:
    """
    Least positive solution of the network inequality system.

    Iterates s <- max(lambda_hat_plus + s A_mp, lambda_hat_minus + s A_pm)
    from s = max(lambda_hat_plus, lambda_hat_minus), with EPS_POS where
    both constants vanish. The operator is monotone, so the iterates
    increase to the least solution above the start; the result is then
    polished by solving the active linear system.

    Args:
        lambda_hat_plus: Per-market (+) arrival constants
        lambda_hat_minus: Per-market (-) arrival constants
        A_mp: Routing matrix into (+)-phases, rows are sources
        A_pm: Routing matrix into (-)-phases, rows are sources
        max_iterations: Iteration cap

    Returns:
        Solution vector s, or Infeasible with iteration diagnostics
    """
    lam_plus = np.asarray(lambda_hat_plus, dtype=float)
    lam_minus = np.asarray(lambda_hat_minus, dtype=float)
    A_mp = np.asarray(A_mp, dtype=float)
    A_pm = np.asarray(A_pm, dtype=float)
    start = np.maximum(lam_plus, lam_minus)
    floor = np.where(start > 0.0, 0.0, EPS_POS)
    s = np.maximum(start, floor)

    change = float("inf")
    for iteration in range(1, max_iterations + 1):
        updated = np.maximum(np.maximum(lam_plus + s @ A_mp, lam_minus + s @ A_pm), floor)
        change = float(np.max(np.abs(updated - s)))
        s = updated
        norm = float(np.max(s))
        if norm > DIVERGENCE_BOUND:
            logger.info("Network inequalities diverge after %d iterations", iteration)
            return Infeasible(iteration, change, norm, "iterates exceed the divergence bound")
        if change < CONVERGENCE_TOL * max(1.0, norm):
            break
    else:
        return Infeasible(max_iterations, change, float(np.max(s)), "iteration cap reached")

    logger.debug("Monotone iteration converged in %d steps", iteration)
    polished = _polish(s, lam_plus, lam_minus, A_mp, A_pm, floor)
    return polished if polished is not None else s


def fixed_point_network(
    spec: NetworkSpec,
    s: np.ndarray,
    dr: float = DEFAULT_DR,
    r_max: Optional[float] = None,
    tol: float = QUAD_TOL,
) -> List[EquilibriumProfile]:
    """
    Per-market fixed-point profiles for annihilation flows s.

    Market m has gamma_plus = s_m / -v_plus_m, gamma_minus = s_m / v_minus_m,
    and receives sum_k s_k p_km(r) as reinjected mass in each phase.

    Raises:
        InequalitiesViolated: If s is not a positive solution of the system
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (spec.size,):
        raise ValueError(f"Expected {spec.size} flows, got shape {s.shape}")
    consts = network_constants(spec, tol)
    slack_plus, slack_minus = _violations(s, consts.lambda_hat_plus, consts.lambda_hat_minus,
                                          consts.A_mp, consts.A_pm)
    scale = INEQ_TOL * max(1.0, float(np.max(np.abs(s))))
    if np.any(s <= 0.0) or slack_plus.min() < -scale or slack_minus.min() < -scale:
        worst = int(np.argmin(np.minimum(slack_plus, slack_minus)))
        raise InequalitiesViolated(
            f"Flows {s.tolist()} violate the network inequalities at market {worst}",
            market=worst,
        )

    profiles = []
    for m, market in enumerate(spec.markets):
        into_plus = tuple(
            (float(s[k]), spec.routing_minus_plus[(k, m)])
            for k in range(spec.size) if (k, m) in spec.routing_minus_plus
        )
        into_minus = tuple(
            (float(s[k]), spec.routing_plus_minus[(k, m)])
            for k in range(spec.size) if (k, m) in spec.routing_plus_minus
        )
        profiles.append(build_profile(
            market, profile_grid(market, dr, r_max),
            float(s[m]) / -market.v_plus, float(s[m]) / market.v_minus,
            0.0, float(s[m]), EquilibriumKind.FIXED,
            into_plus, into_minus,
            critical_gap=abs(consts.lambda_hat_plus[m] / -market.v_plus
                             - consts.lambda_hat_minus[m] / market.v_minus),
            tol=tol, market=m,
        ))
    return profiles
