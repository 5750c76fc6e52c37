"""
Stochastic two-phase annihilation dynamics.

(+)-particles sit at or right of the boundary b, (-)-particles strictly left
of it. Every step: Poisson arrivals at b +/- r, exponential deaths by
thinning, ballistic advection with v_plus / v_minus, then crossing pairs
annihilate in collision-time order and b jumps to the new leftmost
(+)-particle.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from ..models.data import CompactRateFunction, InitialDensity, MarketParams
from ..models.errors import EmptyPlusPhase
from ..models.results import DensitySnapshot, SimTrajectory, StepReport

logger = logging.getLogger(__name__)


@dataclass
class ParticleEnsemble:
    """
    Particle positions of both phases and the boundary.

    ``plus`` is kept sorted ascending, ``minus`` descending, so the pairs
    that may annihilate next are always at the front of both arrays.
    ``scale`` is the intensity factor N the ensemble was built with.
    """
    plus: np.ndarray
    minus: np.ndarray
    b: float
    t: float
    rng: np.random.Generator = field(repr=False)
    scale: float = 1.0

    @property
    def n_plus(self) -> int:
        return int(self.plus.size)

    @property
    def n_minus(self) -> int:
        return int(self.minus.size)

    @classmethod
    def empty(cls, seed: int, b0: float = 0.0, scale: float = 1.0) -> "ParticleEnsemble":
        return cls(np.empty(0), np.empty(0), b0, 0.0, np.random.default_rng(seed), scale)

    @classmethod
    def from_positions(cls, plus, minus, seed: int, t: float = 0.0) -> "ParticleEnsemble":
        """Ensemble from explicit coordinates; b is the leftmost (+) position."""
        plus = np.sort(np.asarray(plus, dtype=float))
        minus = np.sort(np.asarray(minus, dtype=float))[::-1]
        b = float(plus[0]) if plus.size else (float(minus[0]) if minus.size else 0.0)
        return cls(plus, minus, b, t, np.random.default_rng(seed))

    @classmethod
    def poisson_cloud(cls, init: InitialDensity, scale: float, seed: int) -> "ParticleEnsemble":
        """
        Poisson clouds with intensity scale * rho(r) around init.b0.

        Args:
            init: Initial radial densities of both phases
            scale: Intensity factor N
            seed: Generator seed

        Returns:
            ParticleEnsemble at t = 0
        """
        rng = np.random.default_rng(seed)
        b0 = init.b0
        n_plus = rng.poisson(scale * init.rho_plus.total())
        n_minus = rng.poisson(scale * init.rho_minus.total())
        plus = b0 + (init.rho_plus.sample(rng, n_plus) if n_plus else np.empty(0))
        minus = b0 - (init.rho_minus.sample(rng, n_minus) if n_minus else np.empty(0))
        ensemble = cls(np.sort(plus), np.sort(minus)[::-1], b0, 0.0, rng, scale)
        if ensemble.n_plus:
            ensemble.b = float(ensemble.plus[0])
        return ensemble

    def radii(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distances from the boundary; 0 for (-)-particles right of a frozen b."""
        return self.plus - self.b, np.maximum(self.b - self.minus, 0.0)


def _arrivals(rng: np.random.Generator, rate: CompactRateFunction, scale: float, dt: float) -> np.ndarray:
    if rate.is_zero:
        return np.empty(0)
    count = rng.poisson(scale * rate.total() * dt)
    return rate.sample(rng, count) if count else np.empty(0)


def _survivors(rng: np.random.Generator, radii: np.ndarray, mu: CompactRateFunction, dt: float) -> np.ndarray:
    if mu.is_zero or radii.size == 0:
        return np.ones(radii.size, dtype=bool)
    survival = np.exp(-np.asarray(mu(radii), dtype=float) * dt)
    return rng.random(radii.size) < survival


def _crossings(plus: np.ndarray, minus: np.ndarray) -> int:
    """Number of leading (plus[k], minus[k]) pairs with plus[k] <= minus[k]."""
    n = min(plus.size, minus.size)
    if n == 0:
        return 0
    return int(np.count_nonzero(plus[:n] <= minus[:n]))


def _reinject(
    rng: np.random.Generator,
    pairs: int,
    kernel: Optional[CompactRateFunction],
) -> np.ndarray:
    """Radii of particles re-entering after `pairs` annihilations."""
    if kernel is None or kernel.is_zero or pairs == 0:
        return np.empty(0)
    count = rng.binomial(pairs, min(kernel.total(), 1.0))
    return kernel.sample(rng, count) if count else np.empty(0)


def step_particles(
    e: ParticleEnsemble,
    p: MarketParams,
    dt: float,
    strict: bool = False,
) -> Tuple[ParticleEnsemble, StepReport, List[Tuple[float, float]]]:
    """
    Advance the ensemble by one time step.

    Arrivals and deaths use radii measured from the step-start boundary.
    After advection, the k-th smallest (+) and the k-th largest (-)
    annihilate while they have crossed; their collision time follows from
    the pre-advection gap. Recycled particles re-enter the opposite phase
    at b +/- r around the new boundary.

    Args:
        e: Ensemble at time t
        p: Market parameters
        dt: Time step
        strict: Raise instead of freezing b when the (+)-phase empties

    Returns:
        (ensemble at t + dt, event counts, annihilation events (t, x))

    Raises:
        EmptyPlusPhase: In strict mode, when no (+)-particle remains
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    rng, b, t = e.rng, e.b, e.t

    new_plus = _arrivals(rng, p.lambda_plus, e.scale, dt)
    new_minus = _arrivals(rng, p.lambda_minus, e.scale, dt)
    plus = np.concatenate((e.plus, b + new_plus))
    minus = np.concatenate((e.minus, b - new_minus))

    keep_plus = _survivors(rng, plus - b, p.mu_plus, dt)
    keep_minus = _survivors(rng, np.maximum(b - minus, 0.0), p.mu_minus, dt)
    deaths_plus = int(plus.size - keep_plus.sum())
    deaths_minus = int(minus.size - keep_minus.sum())
    plus = np.sort(plus[keep_plus])
    minus = np.sort(minus[keep_minus])[::-1]

    closing = p.v_minus - p.v_plus
    gaps_before = None
    count = min(plus.size, minus.size)
    if count:
        gaps_before = plus[:count] - minus[:count]
    plus = plus + p.v_plus * dt
    minus = minus + p.v_minus * dt

    events: List[Tuple[float, float]] = []
    annihilations = recycled_plus = recycled_minus = 0
    first_pass = True
    while True:
        k = _crossings(plus, minus)
        if k == 0:
            break
        if first_pass and gaps_before is not None:
            tau = np.clip(gaps_before[:k] / closing, 0.0, dt)
            positions = minus[:k] - p.v_minus * (dt - tau)
            times = t + tau
        else:
            tau = np.full(k, dt)
            positions = 0.5 * (plus[:k] + minus[:k])
            times = np.full(k, t + dt)
        events.extend(zip(times.tolist(), positions.tolist()))
        last_collision = float(positions[-1])
        plus, minus = plus[k:], minus[k:]
        annihilations += k
        first_pass = False

        anchor = float(plus[0]) if plus.size else last_collision
        back_plus = _reinject(rng, k, p.p_minus_plus)
        back_minus = _reinject(rng, k, p.p_plus_minus)
        recycled_plus += back_plus.size
        recycled_minus += back_minus.size
        if back_plus.size:
            plus = np.sort(np.concatenate((plus, anchor + back_plus)))
        if back_minus.size:
            minus = np.sort(np.concatenate((minus, anchor - back_minus)))[::-1]

    if plus.size:
        b = float(plus[0])
    elif events:
        b = events[-1][1]
    if plus.size == 0 and strict:
        raise EmptyPlusPhase(f"No (+)-particles left at t={t + dt:.6g}", t=t + dt)

    report = StepReport(
        arrivals_plus=int(new_plus.size),
        arrivals_minus=int(new_minus.size),
        deaths_plus=deaths_plus,
        deaths_minus=deaths_minus,
        annihilations=annihilations,
        recycled_plus=recycled_plus,
        recycled_minus=recycled_minus,
    )
    return replace(e, plus=plus, minus=minus, b=b, t=t + dt), report, events


def empirical_density(
    e: ParticleEnsemble,
    bin_width: float,
    r_max: Optional[float] = None,
) -> DensitySnapshot:
    """
    Histogram of both phases over r = |x - b|.

    Counts per bin are divided by bin_width and by the ensemble's
    intensity scale.

    Args:
        e: Ensemble
        bin_width: Width of each r bin
        r_max: End of the last bin, defaults to the largest radius present

    Returns:
        DensitySnapshot with bins [0, w), [w, 2w), ...
    """
    if bin_width <= 0.0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    r_plus, r_minus = e.radii()
    if r_max is None:
        largest = max(r_plus.max(initial=0.0), r_minus.max(initial=0.0))
        r_max = bin_width * max(1, math.floor(largest / bin_width) + 1)
    n_bins = max(1, int(round(r_max / bin_width)))
    edges = np.arange(n_bins + 1) * bin_width
    norm = bin_width * e.scale
    counts_plus, _ = np.histogram(r_plus, bins=edges)
    counts_minus, _ = np.histogram(r_minus, bins=edges)
    return DensitySnapshot(e.t, edges, counts_plus / norm, counts_minus / norm)


def run_particles(
    p: MarketParams,
    init: InitialDensity,
    N: float,
    seed: int,
    T: float,
    dt: float,
    sample_every: int = 0,
    bin_width: float = 0.1,
    r_max: Optional[float] = None,
    strict: bool = False,
) -> SimTrajectory:
    """
    Simulate one replica over [0, T].

    Args:
        p: Validated market parameters
        init: Initial radial densities, scaled by N
        N: Intensity scale applied to initial densities and arrival rates
        seed: Generator seed; equal seeds give identical trajectories
        T: Horizon
        dt: Time step
        sample_every: Record a density snapshot every n steps (0: final only)
        bin_width: Bin width of density snapshots
        r_max: End of the snapshot bins
        strict: Raise EmptyPlusPhase instead of recording it

    Returns:
        SimTrajectory
    """
    e = ParticleEnsemble.poisson_cloud(init, N, seed)
    trajectory = SimTrajectory(seed=seed)
    steps = max(0, int(math.ceil(T / dt - 1e-9))) if T > 0 else 0
    h = T / steps if steps else dt

    def observe(ensemble: ParticleEnsemble) -> None:
        trajectory.times.append(ensemble.t)
        trajectory.b.append(ensemble.b)
        trajectory.n_plus.append(ensemble.n_plus)
        trajectory.n_minus.append(ensemble.n_minus)
        if ensemble.n_plus == 0:
            episodes = trajectory.empty_plus_episodes
            if not episodes or episodes[-1][1] is not None:
                episodes.append((ensemble.t, None))
                logger.warning("Seed %d: (+)-phase empty at t=%.6g; boundary frozen at %.6g",
                               seed, ensemble.t, ensemble.b)
        elif trajectory.empty_plus_episodes and trajectory.empty_plus_episodes[-1][1] is None:
            start, _ = trajectory.empty_plus_episodes[-1]
            trajectory.empty_plus_episodes[-1] = (start, ensemble.t)

    observe(e)
    if strict and e.n_plus == 0:
        raise EmptyPlusPhase("No (+)-particles at t=0", t=0.0)
    for n in range(1, steps + 1):
        e, report, events = step_particles(e, p, h, strict)
        trajectory.reports.append(report)
        trajectory.events.extend(events)
        observe(e)
        if sample_every and n % sample_every == 0 and n != steps:
            trajectory.snapshots.append(empirical_density(e, bin_width, r_max))
    trajectory.snapshots.append(empirical_density(e, bin_width, r_max))
    logger.debug("Seed %d: %d steps, %d annihilations", seed, steps, len(trajectory.events))
    return trajectory
