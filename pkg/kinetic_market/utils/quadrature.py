"""Adaptive Simpson quadrature used by every integral over the price axis."""

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from ..config.constants import MAX_SUBDIVISION_DEPTH, QUAD_TOL
from ..models.errors import NonConvergence

# Per-panel tolerance never drops below QUAD tol / 2**TOL_FLOOR_LEVELS, so
# jumps in the integrand converge after a bounded number of halvings.
TOL_FLOOR_LEVELS = 10


def _simpson(fa: float, fm: float, fb: float, a: float, b: float) -> float:
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = QUAD_TOL,
    max_depth: int = MAX_SUBDIVISION_DEPTH,
) -> float:
    """
    Integrate f over [a, b] with adaptive composite Simpson.

    Args:
        f: Scalar integrand, piecewise smooth on [a, b]
        a: Lower limit
        b: Upper limit, a <= b
        tol: Absolute tolerance
        max_depth: Subdivision limit

    Returns:
        Richardson-corrected Simpson estimate of the integral

    Raises:
        NonConvergence: If a panel still fails the error test at max_depth
        ValueError: If a > b
    """
    if a > b:
        raise ValueError(f"Integration limits out of order: a={a} > b={b}")
    if a == b:
        return 0.0

    floor = tol / 2.0**TOL_FLOOR_LEVELS
    fa, fb = float(f(a)), float(f(b))
    m = 0.5 * (a + b)
    fm = float(f(m))
    total = 0.0
    # Explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, _simpson(fa, fm, fb, a, b), tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left_mid = 0.5 * (lo + mid)
        right_mid = 0.5 * (mid + hi)
        fl = float(f(left_mid))
        fr = float(f(right_mid))
        left = _simpson(flo, fl, fmid, lo, mid)
        right = _simpson(fmid, fr, fhi, mid, hi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or mid in (lo, hi):
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise NonConvergence(
                f"Subdivision limit {max_depth} reached on [{lo}, {hi}]",
                interval=(lo, hi),
            )
        half = max(0.5 * eps, floor)
        stack.append((mid, hi, fmid, fr, fhi, right, half, depth + 1))
        stack.append((lo, mid, flo, fl, fmid, left, half, depth + 1))
    return total


def integrate_pieces(
    f: Callable[[float], float],
    nodes: Iterable[float],
    tol: float = QUAD_TOL,
) -> float:
    """Integrate f over consecutive panels between sorted nodes."""
    points = sorted(set(float(x) for x in nodes))
    if len(points) < 2:
        return 0.0
    panel_tol = tol / (len(points) - 1)
    return math.fsum(
        integrate(f, lo, hi, panel_tol) for lo, hi in zip(points[:-1], points[1:])
    )


def cumulative_integral(
    f: Callable[[float], float],
    grid: Sequence[float],
    breaks: Iterable[float] = (),
    tol: float = QUAD_TOL,
    support_end: float = math.inf,
) -> np.ndarray:
    """
    Tabulate G(r) = int_0^r f on a sorted grid.

    Panels are split at the given breakpoints so the integrand is smooth on
    each sub-panel. Beyond support_end the integrand is taken to be zero and
    G is held constant.

    Args:
        f: Scalar integrand
        grid: Sorted nonnegative tabulation radii, grid[0] == 0
        breaks: Radii where f or its derivative may jump
        tol: Absolute tolerance for the whole tabulation
        support_end: Radius beyond which f vanishes

    Returns:
        Array G with G[j] = int_0^{grid[j]} f
    """
    grid = np.asarray(grid, dtype=float)
    out = np.zeros_like(grid)
    inner = sorted(float(x) for x in breaks if 0.0 < x < support_end)
    n_active = int(np.searchsorted(grid, support_end, side="left")) + 1
    panel_tol = tol / max(n_active, 1)
    acc = 0.0
    cursor = 0
    for j in range(1, grid.size):
        lo, hi = grid[j - 1], min(grid[j], support_end)
        if lo < hi:
            while cursor < len(inner) and inner[cursor] <= lo:
                cursor += 1
            nodes = [lo]
            k = cursor
            while k < len(inner) and inner[k] < hi:
                nodes.append(inner[k])
                k += 1
            nodes.append(hi)
            acc += math.fsum(
                integrate(f, p, q, panel_tol) for p, q in zip(nodes[:-1], nodes[1:])
            )
        out[j] = acc
    return out
