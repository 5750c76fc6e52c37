"""One-phase free dynamics on the (x, v) phase space.

Particles move ballistically with their own velocities, arrive as a Poisson
flow with intensity lambda(x, v, t) and die at rate mu(x, v, t). The
one-particle density f(x, v, t) then solves the linear Boltzmann equation

    df/dt + v df/dx = -mu f + lambda

away from the ends of the interval. ``evolve_free`` integrates it with a
first-order upwind finite-volume scheme; ``characteristics_value`` evaluates
the closed-form solution for lambda = 0 and time-independent mu, and serves
as the scheme's oracle.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Iterator, Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..config.constants import CFL_LIMIT, MIN_VELOCITY_SLICES, QUAD_TOL
from ..models.errors import CflViolation, DomainViolation
from ..utils.quadrature import integrate

logger = logging.getLogger(__name__)

PhaseFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class FreeField:
    """
    Cell values of the one-particle density on I x [-V0, V0].

    values[i, j] is the density at cell centre (x[i], v[j]). ``valid`` marks
    the cells whose domain of dependence has not reached the ends of I.
    """
    x: np.ndarray
    v: np.ndarray
    values: np.ndarray
    interval: Tuple[float, float]
    v_bound: float
    t: float = 0.0
    valid: Optional[np.ndarray] = None

    @classmethod
    def on_grid(
        cls,
        interval: Tuple[float, float],
        nx: int,
        v_bound: float,
        nv: int,
        f0: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ) -> "FreeField":
        """
        Sample an initial density at cell centres.

        Args:
            interval: Ends (x_lo, x_hi) of I
            nx: Number of x cells
            v_bound: Velocity bound V0
            nv: Number of velocity slices, at least MIN_VELOCITY_SLICES
            f0: Vectorized initial density f0(X, V)

        Returns:
            FreeField at t = 0
        """
        if nv < MIN_VELOCITY_SLICES:
            raise ValueError(f"Need at least {MIN_VELOCITY_SLICES} velocity slices, got {nv}")
        x_lo, x_hi = interval
        dx = (x_hi - x_lo) / nx
        dv = 2.0 * v_bound / nv
        x = x_lo + dx * (np.arange(nx) + 0.5)
        v = -v_bound + dv * (np.arange(nv) + 0.5)
        X, V = np.meshgrid(x, v, indexing="ij")
        values = np.asarray(f0(X, V), dtype=float) * np.ones_like(X)
        if np.any(values < 0.0):
            raise ValueError("Initial density must be nonnegative")
        return cls(x, v, values, (float(x_lo), float(x_hi)), float(v_bound))

    @property
    def dx(self) -> float:
        return (self.interval[1] - self.interval[0]) / self.x.size

    @property
    def dv(self) -> float:
        return 2.0 * self.v_bound / self.v.size

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.v, indexing="ij")

    def total_mass(self) -> float:
        """Expected number of particles, the integral of f over the grid."""
        return float(self.values.sum() * self.dx * self.dv)

    def slice_masses(self) -> np.ndarray:
        """Mass carried by each velocity slice."""
        return self.values.sum(axis=0) * self.dx * self.dv

    def interior_mask(self, elapsed: float) -> np.ndarray:
        """Cells farther than V0 * elapsed from both ends of I."""
        x_lo, x_hi = self.interval
        distance = np.minimum(self.x - x_lo, x_hi - self.x)
        inside = distance > self.v_bound * elapsed
        return np.repeat(inside[:, None], self.v.size, axis=1)

    @cached_property
    def interpolator(self) -> RegularGridInterpolator:
        """Bilinear interpolant of the cell values, extrapolated at the rims; built once per field."""
        return RegularGridInterpolator(
            (self.x, self.v), self.values, method="linear",
            bounds_error=False, fill_value=None,
        )

    def rows(self) -> Iterator[Tuple[float, float, float]]:
        """(x, v, f) rows for CSV export."""
        for i, xi in enumerate(self.x):
            for j, vj in enumerate(self.v):
                yield float(xi), float(vj), float(self.values[i, j])


def characteristics_value(
    f0: FreeField,
    mu: Callable[[float, float], float],
    x: float,
    v: float,
    t: float,
    tol: float = QUAD_TOL,
) -> float:
    """
    Closed-form density for lambda = 0 and time-independent mu.

    f(x, v, t) = f0(x - v t, v) * exp(-int_0^t mu(x - v s, v) ds)

    Args:
        f0: Initial field
        mu: Death rate mu(x, v)
        x: Position
        v: Velocity
        t: Time
        tol: Quadrature tolerance for the exponent

    Returns:
        Density value at (x, v, t)

    Raises:
        DomainViolation: If the characteristic leaves I within [0, t]
    """
    x_lo, x_hi = f0.interval
    foot = x - v * t
    if not (x_lo <= x <= x_hi and x_lo <= foot <= x_hi):
        raise DomainViolation(
            f"Characteristic through x={x}, v={v} leaves [{x_lo}, {x_hi}] before t={t}",
            x=x, v=v,
        )
    initial = float(f0.interpolator([[foot, v]])[0])
    if t == 0.0:
        return initial
    exponent = integrate(lambda s: mu(x - v * s, v), 0.0, t, tol)
    return initial * math.exp(-exponent)


def evolve_free(
    f0: FreeField,
    lam: Optional[PhaseFunction],
    mu: Optional[PhaseFunction],
    T: float,
    dt: float,
    periodic: bool = False,
) -> FreeField:
    """
    Integrate df/dt + v df/dx = -mu f + lambda up to time T.

    First-order upwind in x, explicit Euler in the sources. With outflow
    ends (the default) the inflow ghost cells are empty and the returned
    field marks as valid only cells not yet reached by boundary effects.

    Args:
        f0: Initial field
        lam: Arrival intensity lambda(X, V, t), None for zero
        mu: Death rate mu(X, V, t), None for zero
        T: Final time
        dt: Time step bound; the step is shortened so that T is hit exactly
        periodic: Wrap x around instead of using outflow ends

    Returns:
        FreeField at time f0.t + T

    Raises:
        CflViolation: If V0 dt > CFL_LIMIT dx or a step could turn f negative
        DomainViolation: If no interior cell survives the horizon
    """
    if dt <= 0.0 or T < 0.0:
        raise ValueError(f"Need dt > 0 and T >= 0, got dt={dt}, T={T}")
    dx = f0.dx
    if f0.v_bound * dt > CFL_LIMIT * dx:
        raise CflViolation(
            f"V0*dt = {f0.v_bound * dt:.3g} exceeds {CFL_LIMIT}*dx = {CFL_LIMIT * dx:.3g}",
        )
    valid = np.ones_like(f0.values, dtype=bool) if periodic else f0.interior_mask(T)
    if not valid.any():
        raise DomainViolation(f"Horizon T={T} leaves no interior cell at V0={f0.v_bound}")

    steps = max(1, int(math.ceil(T / dt - 1e-12))) if T > 0 else 0
    h = T / steps if steps else 0.0
    X, V = f0.mesh()
    courant = np.abs(V) * h / dx
    moving_right = V > 0.0
    f = f0.values.copy()
    t = f0.t
    logger.debug("evolve_free: %d steps of %.3g on %d x %d cells", steps, h, *f.shape)

    for _ in range(steps):
        decay = mu(X, V, t) if mu is not None else 0.0
        if np.any(courant + h * np.asarray(decay) > 1.0):
            raise CflViolation(f"Step {h:.3g} with death rates up to {np.max(decay):.3g} loses positivity")
        if periodic:
            left, right = np.roll(f, 1, axis=0), np.roll(f, -1, axis=0)
        else:
            left = np.vstack([np.zeros((1, f.shape[1])), f[:-1]])
            right = np.vstack([f[1:], np.zeros((1, f.shape[1]))])
        upwind = np.where(moving_right, f - left, right - f)
        f_new = f - courant * np.where(moving_right, upwind, -upwind)
        f_new -= h * decay * f
        if lam is not None:
            f_new += h * lam(X, V, t)
        f = f_new
        t += h

    return replace(f0, values=f, t=t, valid=valid)
