"""Deterministic engine: moving-boundary densities, or the free field."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

from ..config.constants import EngineKind, ModelTier
from ..kinetics.fluid import FluidState, NetworkFluidState, run_fluid, run_network
from ..kinetics.free import FreeField, evolve_free
from ..models.results import FluidSeries
from ..models.scenario import Scenario
from ..utils.csv_export import write_rows
from .base import BaseEngine, EngineRun

logger = logging.getLogger(__name__)

SERIES_FIELDS = ("t", "b", "beta", "nu")
SNAPSHOT_FIELDS = ("t", "b", "beta", "phase", "r", "rho")


class FluidEngine(BaseEngine):
    """Integrates the density equations of any tier with explicit steps."""

    kind = EngineKind.FLUID
    tiers = (ModelTier.FREE, ModelTier.SINGLE, ModelTier.RECYCLING, ModelTier.NETWORK)

    def __init__(self, parallel_markets: bool = False):
        self.parallel_markets = parallel_markets

    def integrate(self, scenario: Scenario) -> Tuple[FluidState, FluidSeries, List[FluidState]]:
        """Run a single or recycling market from its initial densities."""
        n = scenario.numerics
        state = FluidState.from_initial(scenario.initial, n.dr, scenario.r_max())
        return run_fluid(state, scenario.market, n.T, n.dt, n.boundary_extrapolation, n.sample_every)

    def integrate_network(self, scenario: Scenario):
        """Run every market of a network; returns (final, series per market, snapshots)."""
        n = scenario.numerics
        r_max = scenario.r_max()
        state = NetworkFluidState(tuple(
            FluidState.from_initial(init, n.dr, r_max) for init in scenario.initial_network
        ))
        if not self.parallel_markets:
            return run_network(state, scenario.network, n.T, n.dt, n.boundary_extrapolation,
                               n.sample_every)
        with ThreadPoolExecutor() as pool:
            return run_network(state, scenario.network, n.T, n.dt, n.boundary_extrapolation,
                               n.sample_every, executor=pool)

    def evolve(self, scenario: Scenario) -> FreeField:
        """Integrate the free one-phase field up to T."""
        free, n = scenario.free, scenario.numerics
        field = FreeField.on_grid(free.interval, free.nx, free.v_bound, free.nv, free.initial_density)
        lam = free.arrival_rate if free.lam is not None else None
        mu = free.death_rate if free.mu is not None else None
        return evolve_free(field, lam, mu, n.T, n.dt)

    def run(self, scenario: Scenario, out_dir: str, seeds: Optional[List[int]] = None) -> EngineRun:
        self._check_tier(scenario)
        started = time.time()
        logger.info("Fluid run of %s (tier %s)", scenario.name, scenario.model_tier.value)
        result = EngineRun(self.kind)
        tier = scenario.model_tier

        if tier is ModelTier.FREE:
            field = self.evolve(scenario)
            result.artifacts.append(write_rows(self._path(out_dir, "field.csv"),
                                               ("x", "v", "f"), field.rows()))
            result.summary = {"t": field.t, "total_mass": field.total_mass(),
                              "valid_cells": int(field.valid.sum())}
        elif tier is ModelTier.NETWORK:
            final, series, snapshots = self.integrate_network(scenario)
            for m, record in enumerate(series):
                states = [snap.markets[m] for snap in snapshots] + [final.markets[m]]
                result.artifacts.extend(self._write(out_dir, f"_market{m}", record, states))
                result.summary[f"market_{m}"] = self._summary(final.markets[m], record)
        else:
            final, record, snapshots = self.integrate(scenario)
            result.artifacts.extend(self._write(out_dir, "", record, snapshots + [final]))
            result.summary = self._summary(final, record)

        logger.info("Fluid run of %s finished in %.2fs", scenario.name, time.time() - started)
        return result

    def _write(self, out_dir: str, suffix: str, record: FluidSeries, states: List[FluidState]) -> List[str]:
        return [
            write_rows(self._path(out_dir, f"series{suffix}.csv"), SERIES_FIELDS, record.rows()),
            write_rows(self._path(out_dir, f"snapshots{suffix}.csv"), SNAPSHOT_FIELDS,
                       (row for state in states for row in state.rows())),
        ]

    @staticmethod
    def _summary(final: FluidState, record: FluidSeries) -> dict:
        mass_plus, mass_minus = final.masses()
        return {
            "t": final.t,
            "b": final.b,
            "beta": final.beta,
            "nu": final.nu,
            "mass_plus": mass_plus,
            "mass_minus": mass_minus,
            "degenerate_steps": record.degenerate_steps,
            "budget_residual": record.budget_residual,
            "throughput": record.throughput,
        }
