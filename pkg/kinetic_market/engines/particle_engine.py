"""Particle engine: independent Monte Carlo replicas of one market."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from ..config.constants import EngineKind, ModelTier
from ..kinetics.particles import run_particles
from ..models.results import SimTrajectory
from ..models.scenario import Scenario
from ..utils.csv_export import write_rows
from .base import BaseEngine, EngineRun

logger = logging.getLogger(__name__)


class ParticleEngine(BaseEngine):
    """Runs one trajectory per seed, in parallel worker threads."""

    kind = EngineKind.PARTICLES
    tiers = (ModelTier.SINGLE, ModelTier.RECYCLING)

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers

    def replicas(
        self,
        scenario: Scenario,
        seeds: List[int],
        intensity: Optional[float] = None,
        T: Optional[float] = None,
    ) -> List[SimTrajectory]:
        """
        Simulate one trajectory per seed.

        Results are ordered by seed, whatever order the workers finish in.
        """
        self._check_tier(scenario)
        n = scenario.numerics
        scale = n.intensity_scale if intensity is None else intensity
        horizon = n.T if T is None else T
        r_max = scenario.r_max()

        def one(seed: int) -> SimTrajectory:
            return run_particles(
                scenario.market, scenario.initial, scale, seed, horizon, n.dt,
                n.sample_every, n.bin_width, r_max,
            )

        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            trajectories = list(pool.map(one, sorted(seeds)))
        return trajectories

    def run(self, scenario: Scenario, out_dir: str, seeds: Optional[List[int]] = None) -> EngineRun:
        seeds = sorted(seeds if seeds is not None else scenario.numerics.replica_seeds())
        started = time.time()
        logger.info("Particle run of %s: %d replicas, N=%g", scenario.name, len(seeds),
                    scenario.numerics.intensity_scale)
        result = EngineRun(self.kind, seeds=seeds)
        for trajectory in self.replicas(scenario, seeds):
            result.artifacts.extend(self._write(trajectory, out_dir, scenario.outputs.write_events))
            result.summary[f"seed_{trajectory.seed}"] = {
                "final_b": trajectory.b[-1],
                "final_n_plus": trajectory.n_plus[-1],
                "final_n_minus": trajectory.n_minus[-1],
                "annihilations": len(trajectory.events),
                "transaction_rate": trajectory.transaction_rate,
                "empty_plus_episodes": [list(e) for e in trajectory.empty_plus_episodes],
            }
        logger.info("Particle run of %s finished in %.2fs", scenario.name, time.time() - started)
        return result

    def _write(self, trajectory: SimTrajectory, out_dir: str, write_events: bool) -> List[str]:
        seed = trajectory.seed
        paths = [
            write_rows(self._path(out_dir, f"trajectory_seed{seed}.csv"),
                       ("t", "b", "n_plus", "n_minus"), trajectory.rows()),
            write_rows(self._path(out_dir, f"snapshots_seed{seed}.csv"),
                       ("t", "phase", "r_bin", "density"),
                       (row for snap in trajectory.snapshots for row in snap.rows())),
        ]
        if write_events:
            paths.append(write_rows(self._path(out_dir, f"events_seed{seed}.csv"),
                                    ("t", "x"), trajectory.events))
        return paths
