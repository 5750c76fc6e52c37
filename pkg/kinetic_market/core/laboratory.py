"""Main laboratory orchestrator."""

import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..config.constants import CFL_LIMIT, EngineKind, EquilibriumKind, ExitCode, ModelTier
from ..engines.base import BaseEngine
from ..engines.fluid_engine import FluidEngine
from ..engines.particle_engine import ParticleEngine
from ..kinetics.equilibria import (
    critical_constants,
    fixed_point_recycling,
    fixed_point_single,
    solve_boundary_quadratic,
    stationary_point_recycling,
    stationary_point_single,
    verify_equilibrium,
)
from ..kinetics.network import fixed_point_network, network_constants, solve_network_inequalities
from ..models.errors import BelowCritical, ConfigError, ErrorDetail, ErrorSeverity
from ..models.results import EquilibriumProfile, Infeasible, NoFixedPoint
from ..models.scenario import Scenario
from ..utils.csv_export import write_rows
from ..utils.manifest import RunManifest, config_hash, write_json
from . import criteria

logger = logging.getLogger(__name__)

DENSITY_FIELDS = ("phase", "r", "rho")

# Criteria each tier can run, in report order
TIER_CRITERIA = {
    ModelTier.FREE: ("characteristics",),
    ModelTier.SINGLE: ("persistence", "residuals", "conservation", "convergence"),
    ModelTier.RECYCLING: ("persistence", "quadratic", "residuals", "conservation", "convergence"),
    ModelTier.NETWORK: ("persistence", "residuals", "conservation"),
}


@dataclass
class LabResult:
    """What a laboratory command produced."""
    exit_code: ExitCode
    report: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    manifest: Optional[str] = None


def _config_error(message: str, field_name: str, error_type: str = "UNSUPPORTED_REQUEST") -> ConfigError:
    return ConfigError(message, [ErrorDetail(
        severity=ErrorSeverity.ERROR, message=message, error_type=error_type, field=field_name,
    )])


class Laboratory:
    """
    Orchestrates engines, equilibrium solvers and the validation suite
    for one scenario at a time, and writes every result with its manifest.
    """

    def __init__(self, max_workers: Optional[int] = None):
        """Initialize the laboratory with the available engines."""
        self._engines: Dict[str, BaseEngine] = {
            EngineKind.PARTICLES.value: ParticleEngine(max_workers=max_workers),
            EngineKind.FLUID.value: FluidEngine(),
        }

    def engine(self, kind: str) -> BaseEngine:
        found = self._engines.get(str(kind).lower())
        if found is None:
            supported = ", ".join(sorted(self._engines))
            raise _config_error(f"Unknown engine {kind!r}; choose one of {supported}",
                                "engine", "UNKNOWN_ENGINE")
        return found

    @staticmethod
    def _out_dir(scenario: Scenario, out_dir: Optional[str]) -> str:
        return out_dir or scenario.outputs.directory

    @staticmethod
    def _manifest(command: str, scenario: Scenario, seeds: Sequence[int] = (),
                  **parameters: Any) -> RunManifest:
        return RunManifest(
            command=command,
            scenario=scenario.name,
            config_hash=config_hash(scenario.raw or scenario.to_dict()),
            seeds=list(seeds),
            parameters={k: v for k, v in parameters.items() if v is not None},
        )

    def simulate(
        self,
        scenario: Scenario,
        engine: str = EngineKind.FLUID.value,
        out_dir: Optional[str] = None,
        seed: Optional[int] = None,
        replicas: Optional[int] = None,
    ) -> LabResult:
        """
        Run one engine on a scenario and write its artifacts.

        Args:
            scenario: Validated scenario
            engine: "particles" or "fluid"
            out_dir: Output directory, defaults to the scenario's
            seed: First replica seed, overriding the scenario's seeds
            replicas: Replica count, overriding the scenario's

        Returns:
            LabResult with exit code OK and the manifest path

        Raises:
            ConfigError: If the engine does not support the tier
            KineticError: On runtime failures
        """
        runner = self.engine(engine)
        directory = self._out_dir(scenario, out_dir)
        overrides: Dict[str, Any] = {}
        if seed is not None:
            overrides["seeds"] = [seed]
        if replicas is not None:
            overrides["replicas"] = replicas
        if overrides:
            scenario = replace(scenario, numerics=replace(scenario.numerics, **overrides))
        numerics = scenario.numerics
        seeds = numerics.replica_seeds() if runner.kind is EngineKind.PARTICLES else []

        manifest = self._manifest("simulate", scenario, seeds, engine=runner.kind.value,
                                  numerics=numerics.to_dict())
        run = runner.run(scenario, directory, seeds or None)
        manifest.artifacts = list(run.artifacts)
        path = manifest.finish().write(directory)
        return LabResult(ExitCode.OK, {"engine": runner.kind.value, "summary": run.summary},
                         run.artifacts, path)

    def equilibrium(
        self,
        scenario: Scenario,
        kind: str = EquilibriumKind.FIXED.value,
        gamma_plus: Optional[float] = None,
        gamma_minus: Optional[float] = None,
        s_bar: Optional[Sequence[float]] = None,
        out_dir: Optional[str] = None,
    ) -> LabResult:
        """
        Compute a closed-form equilibrium and write its report and densities.

        Missing boundary densities default to the tier's critical values.
        The absence of an equilibrium (no fixed point, a boundary density
        below critical, infeasible network inequalities) is a result, not
        a failure, and returns exit code OK.

        Raises:
            ConfigError: For the free tier, an unknown kind, or a stationary
                request on a network
            KineticError: If a solver fails
        """
        try:
            eq_kind = EquilibriumKind(str(kind).lower())
        except ValueError:
            raise _config_error(f"Unknown equilibrium kind {kind!r}", "kind", "UNKNOWN_KIND")
        tier = scenario.model_tier
        if tier is ModelTier.FREE:
            raise _config_error("The free tier has no moving boundary to equilibrate", "model_tier")
        if tier is ModelTier.NETWORK and eq_kind is EquilibriumKind.STATIONARY:
            raise _config_error("Network equilibria are fixed points; use --kind fixed", "kind")

        directory = self._out_dir(scenario, out_dir)
        dr = scenario.numerics.dr
        manifest = self._manifest("equilibrium", scenario, kind=eq_kind.value,
                                  gamma_plus=gamma_plus, gamma_minus=gamma_minus,
                                  s_bar=list(s_bar) if s_bar is not None else None, dr=dr)
        if tier is ModelTier.NETWORK:
            report, profiles = self._network_equilibrium(scenario, s_bar, dr)
        else:
            report, profiles = self._market_equilibrium(scenario, eq_kind, gamma_plus, gamma_minus, dr)

        artifacts = []
        for profile in profiles:
            suffix = "" if profile.market is None else f"_market{profile.market}"
            artifacts.append(write_rows(os.path.join(directory, f"densities{suffix}.csv"),
                                        DENSITY_FIELDS, profile.rows()))
        artifacts.append(write_json(os.path.join(directory, "equilibrium.json"), report))
        manifest.artifacts = list(artifacts)
        path = manifest.finish().write(directory)
        return LabResult(ExitCode.OK, report, artifacts, path)

    def _market_equilibrium(self, scenario: Scenario, kind: EquilibriumKind,
                            gamma_plus: Optional[float], gamma_minus: Optional[float], dr: float):
        market = scenario.market
        recycling = scenario.model_tier is ModelTier.RECYCLING
        consts = critical_constants(market, dr)
        report: Dict[str, Any] = {"tier": scenario.model_tier.value, "kind": kind.value,
                                  "constants": consts.to_dict()}

        if kind is EquilibriumKind.FIXED:
            default = consts.gamma_hat_cr if recycling else consts.gamma_cr
            gp = default if gamma_plus is None else gamma_plus
            solve = fixed_point_recycling if recycling else fixed_point_single
            result = solve(market, gp, dr)
        elif recycling:
            root = solve_boundary_quadratic(consts.sigma_plus, consts.sigma_minus, consts.alpha_mp,
                                            consts.alpha_pm, market.v_plus, market.v_minus)
            report["quadratic"] = {"beta": root.beta, "branch": root.branch,
                                   "scaled_residual": root.residual,
                                   "coefficients": list(root.coefficients)}
            result = stationary_point_recycling(market, dr)
        else:
            gp = consts.gamma_cr_plus if gamma_plus is None else gamma_plus
            gm = consts.gamma_cr_minus if gamma_minus is None else gamma_minus
            try:
                result = stationary_point_single(market, gp, gm, dr)
            except BelowCritical as exc:
                report.update(below_critical=True, phase=exc.phase, message=exc.message,
                              gamma_plus=gp, gamma_minus=gm)
                logger.info("No stationary point: %s", exc.message)
                return report, []

        if isinstance(result, NoFixedPoint):
            report.update(result.to_dict())
            logger.info("No fixed point: gamma_plus=%.6g below %.6g", result.gamma_plus, result.threshold)
            return report, []
        report["profile"] = result.to_dict()
        report["residuals"] = verify_equilibrium(result, market).to_dict()
        return report, [result]

    def _network_equilibrium(self, scenario: Scenario, s_bar: Optional[Sequence[float]], dr: float):
        spec = scenario.network
        consts = network_constants(spec)
        report: Dict[str, Any] = {"tier": scenario.model_tier.value, "kind": EquilibriumKind.FIXED.value,
                                  "constants": consts.to_dict()}
        if s_bar is None:
            solved = solve_network_inequalities(consts.lambda_hat_plus, consts.lambda_hat_minus,
                                                consts.A_mp, consts.A_pm)
            if isinstance(solved, Infeasible):
                report.update(solved.to_dict())
                return report, []
            s = solved
            report["s_bar_source"] = "least solution"
        else:
            if len(s_bar) != spec.size:
                raise _config_error(f"s_bar needs {spec.size} entries, got {len(s_bar)}",
                                    "s_bar", "INVALID_VALUE")
            s = np.asarray(s_bar, dtype=float)
            report["s_bar_source"] = "given"
        report["s_bar"] = s.tolist()
        profiles = fixed_point_network(spec, s, dr)
        report["markets"] = [
            dict(p.to_dict(), residuals=verify_equilibrium(p, spec.markets[m]).to_dict())
            for m, p in enumerate(profiles)
        ]
        return report, profiles

    def validate(self, scenario: Scenario, out_dir: Optional[str] = None) -> LabResult:
        """
        Run the cross-engine criteria that apply to the scenario's tier.

        Returns:
            LabResult with exit code VALIDATION_FAILED if any criterion that
            ran did not pass
        """
        tier = scenario.model_tier
        applicable = TIER_CRITERIA[tier]
        requested = scenario.validation.criteria or list(applicable)
        fluid = self._engines[EngineKind.FLUID.value]
        particles = self._engines[EngineKind.PARTICLES.value]
        checks = {
            "characteristics": lambda: criteria.characteristics_criterion(scenario),
            "persistence": lambda: criteria.persistence_criterion(scenario),
            "quadratic": lambda: criteria.quadratic_criterion(scenario),
            "residuals": lambda: criteria.residual_criterion(scenario),
            "conservation": lambda: criteria.conservation_criterion(scenario, fluid),
            "convergence": lambda: criteria.convergence_criterion(scenario, particles, fluid),
        }

        report = criteria.ValidationReport(scenario.name)
        for name in requested:
            if name not in applicable:
                report.results.append(criteria.skipped(name, f"not applicable to tier {tier.value}"))
                continue
            logger.info("Running criterion %s on %s", name, scenario.name)
            result = checks[name]()
            if not result.passed:
                logger.warning("Criterion %s failed: %s", name, result.measured)
            report.results.append(result)

        directory = self._out_dir(scenario, out_dir)
        manifest = self._manifest("validate", scenario, scenario.numerics.replica_seeds(),
                                  criteria=list(requested))
        artifact = write_json(os.path.join(directory, "validation.json"), report.to_dict())
        manifest.artifacts = [artifact]
        path = manifest.finish().write(directory)
        code = ExitCode.OK if report.passed else ExitCode.VALIDATION_FAILED
        return LabResult(code, report.to_dict(), [artifact], path)

    def inspect(self, scenario: Scenario) -> LabResult:
        """Tier, derived constants and the largest admissible dt; runs nothing."""
        tier = scenario.model_tier
        report: Dict[str, Any] = {"name": scenario.name, "tier": tier.value,
                                  "config_hash": config_hash(scenario.raw or scenario.to_dict()),
                                  "numerics": scenario.numerics.to_dict()}
        if tier is ModelTier.FREE:
            free = scenario.free
            dx = (free.interval[1] - free.interval[0]) / free.nx
            report["dt_max"] = CFL_LIMIT * dx / free.v_bound
            return LabResult(ExitCode.OK, report)

        if tier is ModelTier.NETWORK:
            report["constants"] = network_constants(scenario.network).to_dict()
        else:
            report["constants"] = critical_constants(scenario.market, scenario.numerics.dr).to_dict()
        report["r_max"] = scenario.r_max()
        report["dt_max"] = self.dt_bound(scenario)
        return LabResult(ExitCode.OK, report)

    @staticmethod
    def dt_bound(scenario: Scenario) -> float:
        """Largest dt passing every step-size check of the fluid scheme."""
        n = scenario.numerics
        weight = 1.5 if n.boundary_extrapolation else 1.0
        bounds = []
        for market in scenario.markets:
            speed = market.v_minus - market.v_plus
            mu_max = max(max(market.mu_plus.values), max(market.mu_minus.values))
            bounds.append(CFL_LIMIT * n.dr / (weight * speed))
            if mu_max > 0.0:
                bounds.append(CFL_LIMIT / mu_max)
            bounds.append(1.0 / (weight * speed / n.dr + mu_max))
        return min(bounds)
