"""
Property and oracle checks across solvers and engines.

Each class exercises one end-to-end property on the shipped box-rate
scenarios or on randomized instances. Monte Carlo and large randomized
sweeps carry the ``slow`` marker.
"""

import dataclasses
import math
import os

import numpy as np
import pytest

from kinetic_market import load_scenario, scenario_from_dict
from kinetic_market.core import criteria
from kinetic_market.engines.fluid_engine import FluidEngine
from kinetic_market.engines.particle_engine import ParticleEngine
from kinetic_market.kinetics.equilibria import (
    critical_constants,
    fixed_point_recycling,
    fixed_point_single,
    solve_boundary_quadratic,
    stationary_point_recycling,
    verify_equilibrium,
)
from kinetic_market.kinetics.fluid import FluidState, boundary_velocity, run_fluid
from kinetic_market.kinetics.network import solve_network_inequalities
from kinetic_market.models.data import CompactRateFunction, MarketParams
from kinetic_market.models.results import (
    DensitySnapshot,
    EquilibriumProfile,
    FluidSeries,
    NoFixedPoint,
    SimTrajectory,
)
from tests.conftest import SCENARIO_DIR, box_rate

ROOT = 5.0 - math.sqrt(26.0)


def shipped(name: str):
    return load_scenario(os.path.join(SCENARIO_DIR, name))


def random_rate(rng: np.random.Generator, radius: float, top: float) -> CompactRateFunction:
    nodes = np.linspace(0.0, radius, 4)
    values = rng.uniform(0.0, top, 4)
    values[-1] = 0.0
    return CompactRateFunction(tuple(nodes), tuple(values))


def random_market(rng: np.random.Generator, recycling: bool = False) -> MarketParams:
    radius = rng.uniform(0.5, 1.5)
    kernels = {}
    if recycling:
        kernels = {
            "p_minus_plus": CompactRateFunction.box(rng.uniform(0.0, 0.9) / radius, radius),
            "p_plus_minus": CompactRateFunction.box(rng.uniform(0.0, 0.9) / radius, radius),
        }
    return MarketParams(
        v_plus=-rng.uniform(0.5, 2.0),
        v_minus=rng.uniform(0.5, 2.0),
        lambda_plus=random_rate(rng, radius, 2.0),
        lambda_minus=random_rate(rng, radius, 2.0),
        mu_plus=random_rate(rng, radius, 1.0),
        mu_minus=random_rate(rng, radius, 1.0),
        **kernels,
    )


class TestCharacteristicsOracle:
    """Upwind free field against the closed form on randomized bumps."""

    def test_free_scenario(self):
        result = criteria.characteristics_criterion(shipped("free_bump.json"))
        assert result.passed, result.measured
        assert len(result.measured["cases"]) == 5
        assert result.measured["worst_order"] >= 0.9


class TestEquilibriumPersistence:
    """The fluid solver keeps closed-form equilibria in place."""

    def test_single_market_fixed_point(self):
        result = criteria.persistence_criterion(shipped("box_single.json"))
        assert result.passed, result.measured
        fixed = result.measured["fixed"]
        assert fixed["drift"] < 1e-3
        assert fixed["max_abs_beta"] < 1e-6

    def test_recycling_fixed_point(self):
        result = criteria.persistence_criterion(shipped("box_recycling.json"))
        assert result.passed, result.measured
        assert result.measured["stationary"]["skipped"]
        assert result.measured["stationary"]["beta"] == pytest.approx(ROOT, abs=1e-9)

    def test_symmetric_recycling_stationary_point(self):
        scenario = shipped("symmetric_recycling.json")
        profile = stationary_point_recycling(scenario.market, scenario.numerics.dr)
        assert abs(profile.beta) < 1e-12
        assert profile.gamma_plus == pytest.approx(1.0 / 0.7, rel=1e-8)
        result = criteria.persistence_criterion(scenario)
        assert result.passed, result.measured
        stationary = result.measured["stationary"]
        assert "skipped" not in stationary
        assert stationary["drift"] < 1e-3
        assert stationary["max_abs_beta"] < 1e-6

    def test_network_fixed_point(self):
        result = criteria.persistence_criterion(shipped("two_market_network.json"))
        assert result.passed, result.measured
        assert set(result.measured) == {"network[0]", "network[1]"}

    def test_start_at_fixed_point_directly(self, box_market):
        profile = fixed_point_single(box_market, 1.0, dr=1e-3)
        start = FluidState.from_profile(profile, 1e-3, 3.5)
        final, series, _ = run_fluid(start, box_market, 1.0, 4e-4)
        keep = start.r <= 1.5
        assert np.max(np.abs(final.rho_plus[keep] - start.rho_plus[keep])) < 1e-3
        assert max(abs(b) for b in series.beta) < 1e-6
        assert abs(final.b) < 1e-6


class TestQuadraticFidelity:
    """Stationary recycling points on randomized markets."""

    def test_hand_derived_case(self):
        assert solve_boundary_quadratic(1.0, 1.0, 0.4, 0.2, -1.0, 1.0).beta == pytest.approx(ROOT, abs=1e-12)

    def test_box_scenario(self):
        result = criteria.quadratic_criterion(shipped("box_recycling.json"))
        assert result.passed, result.measured
        assert result.measured["beta"] == pytest.approx(ROOT, abs=1e-9)

    @pytest.mark.slow
    def test_randomized_recycling_markets(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            market = random_market(rng, recycling=True)
            consts = critical_constants(market, 0.05)
            root = solve_boundary_quadratic(consts.sigma_plus, consts.sigma_minus, consts.alpha_mp,
                                            consts.alpha_pm, market.v_plus, market.v_minus)
            assert root.residual < 1e-12
            assert market.v_plus < root.beta < market.v_minus
            profile = stationary_point_recycling(market, dr=0.05)
            assert profile.gamma_plus > 0.0 and profile.gamma_minus > 0.0
            nu_minus = (market.v_minus - profile.beta) * profile.gamma_minus
            nu_plus = (profile.beta - market.v_plus) * profile.gamma_plus
            assert nu_minus == pytest.approx(nu_plus, rel=1e-10)


class TestBranchContinuity:
    """Quadratic roots approach the linear root as the leading term vanishes."""

    def test_offset_path(self):
        sp, sm, vp, vm = 1.3, 0.7, -1.5, 0.8
        linear = (sm - sp) / (sm / vm - sp / vp)
        amp = 0.25
        apm_zero = sm * amp / sp
        for offset in (1e-4, 1e-6, 1e-8, 1e-10):
            root = solve_boundary_quadratic(sp, sm, amp, apm_zero + offset / sp, vp, vm)
            assert root.branch == "quadratic"
            if offset == 1e-10:
                assert root.beta == pytest.approx(linear, abs=1e-8)
        exact = solve_boundary_quadratic(sp, sm, 0.0, 0.0, vp, vm)
        assert exact.branch == "linear"
        assert exact.beta == pytest.approx(linear, abs=1e-12)


class TestThresholdDichotomy:
    """No fixed point exactly below the critical density."""

    @pytest.mark.slow
    def test_single_market(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            market = random_market(rng)
            threshold = critical_constants(market, 0.02).gamma_cr
            gamma = threshold * rng.uniform(0.8, 1.2)
            result = fixed_point_single(market, gamma, dr=0.02)
            assert isinstance(result, NoFixedPoint) == (gamma < threshold - 1e-12)
            if isinstance(result, EquilibriumProfile):
                assert result.rho_plus.min() >= 0.0
                assert result.rho_minus.min() >= 0.0

    @pytest.mark.slow
    def test_recycling_market(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            market = random_market(rng, recycling=True)
            threshold = critical_constants(market, 0.02).gamma_hat_cr
            gamma = threshold * rng.uniform(0.8, 1.2)
            result = fixed_point_recycling(market, gamma, dr=0.02)
            assert isinstance(result, NoFixedPoint) == (gamma < threshold - 1e-12)
            if isinstance(result, EquilibriumProfile):
                assert result.rho_plus.min() >= 0.0
                assert result.rho_minus.min() >= 0.0

    def test_exact_threshold_has_a_fixed_point(self, box_market):
        threshold = critical_constants(box_market).gamma_cr
        assert isinstance(fixed_point_single(box_market, threshold), EquilibriumProfile)
        assert isinstance(fixed_point_single(box_market, threshold - 1e-9), NoFixedPoint)


class TestInequalitySolver:
    """Least solutions of random substochastic systems."""

    def test_least_solution_property(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            A_mp = rng.uniform(0.0, 1.0, (n, n)) * rng.uniform(0.1, 0.9) / n
            A_pm = rng.uniform(0.0, 1.0, (n, n)) * rng.uniform(0.1, 0.9) / n
            lam_plus = rng.uniform(0.0, 2.0, n)
            lam_minus = rng.uniform(0.1, 2.0, n)
            s = solve_network_inequalities(lam_plus, lam_minus, A_mp, A_pm)
            assert np.all(s >= lam_plus + s @ A_mp - 1e-12 * max(1.0, s.max()))
            assert np.all(s >= lam_minus + s @ A_pm - 1e-12 * max(1.0, s.max()))
            for m in range(n):
                lowered = s.copy()
                lowered[m] -= 1e-6
                broken = (lowered < lam_plus + lowered @ A_mp) | (lowered < lam_minus + lowered @ A_pm)
                assert broken.any()

    def test_hand_derived_instances(self):
        assert solve_network_inequalities([1.0], [1.0], [[0.9]], [[0.0]])[0] == pytest.approx(10.0, abs=1e-12)
        s = solve_network_inequalities([1.0, 1.0], [1.0, 1.0], [[0.0, 0.6], [0.6, 0.0]], np.zeros((2, 2)))
        np.testing.assert_allclose(s, [2.5, 2.5], atol=1e-12)


class TestParticleConvergence:
    """Monte Carlo densities approach the fluid solution like N^(-1/2)."""

    @pytest.mark.slow
    def test_box_market_ladder(self):
        scenario = shipped("box_single_particles.json")
        result = criteria.convergence_criterion(scenario, ParticleEngine(), FluidEngine())
        assert result.passed, result.measured
        assert -0.7 <= result.measured["slope"] <= -0.3
        assert [row["N"] for row in result.measured["ladder"]] == [100.0, 1000.0, 10000.0]
        tracking = result.measured["b_tracking"]
        assert [row["t"] for row in tracking] == pytest.approx([0.5, 1.0, 1.5, 2.0])
        assert all(row["passed"] for row in tracking)

    def test_boundary_tracking_checks_every_snapshot(self):
        edges = np.array([0.0, 0.1])
        empty = np.zeros(1)
        series = FluidSeries(times=[1.0, 2.0], b=[0.0, 0.0])
        trajectories = [
            SimTrajectory(seed=seed, times=[0.0, 1.0, 2.0], b=[0.0, early, late],
                          snapshots=[DensitySnapshot(1.0, edges, empty, empty),
                                     DensitySnapshot(2.0, edges, empty, empty)])
            for seed, (early, late) in enumerate([(0.1, 1.0), (-0.1, 1.1), (0.1, 0.9), (-0.1, 1.0)])
        ]
        rows = criteria.boundary_tracking(trajectories, series, 0.0)
        assert [row["t"] for row in rows] == [1.0, 2.0]
        assert rows[0]["passed"]
        assert rows[0]["mean_b"] == pytest.approx(0.0, abs=1e-12)
        assert not rows[1]["passed"]
        assert rows[1]["gap"] == pytest.approx(1.0)
        assert rows[1]["standard_error"] == pytest.approx(np.std([1.0, 1.1, 0.9, 1.0], ddof=1) / 2.0)

    def test_short_ladder_is_skipped(self, single_doc):
        result = criteria.convergence_criterion(scenario_from_dict(single_doc), ParticleEngine(), FluidEngine())
        assert result.skipped


class TestReductionChain:
    """Recycling with zero kernels, one-market networks and alpha = 0."""

    def test_closed_forms(self, box_market):
        zero = CompactRateFunction.zero()
        recycling = dataclasses.replace(box_market, p_minus_plus=zero, p_plus_minus=zero)
        single = fixed_point_single(box_market, 1.0)
        reduced = fixed_point_recycling(recycling, 1.0)
        np.testing.assert_allclose(reduced.rho_plus, single.rho_plus, atol=1e-10)
        np.testing.assert_allclose(reduced.rho_minus, single.rho_minus, atol=1e-10)

    def test_quadratic_without_recycling(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            sp, sm = rng.uniform(0.1, 3.0, 2)
            vp, vm = -rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)
            root = solve_boundary_quadratic(sp, sm, 0.0, 0.0, vp, vm)
            expected, _ = boundary_velocity(sp / -vp, sm / vm, vp, vm)
            assert root.beta == pytest.approx(expected, abs=1e-12)


class TestConservationAudit:
    """Mass budgets of whole fluid runs."""

    @pytest.mark.parametrize("name", ["box_single.json", "box_recycling.json", "symmetric_recycling.json",
                                      "two_market_network.json"])
    def test_budget_closes(self, name):
        result = criteria.conservation_criterion(shipped(name), FluidEngine())
        assert result.passed, result.measured
        assert result.measured["cumulative_residual"] < 1e-3 * result.measured["throughput"]


class TestResidualVerification:
    """Closed-form profiles solve their stationary equations."""

    @pytest.mark.parametrize("name", ["box_single.json", "box_recycling.json", "symmetric_recycling.json",
                                      "two_market_network.json"])
    def test_shipped_scenarios(self, name):
        result = criteria.residual_criterion(shipped(name))
        assert result.passed, result.measured

    def test_second_order_with_deaths(self):
        box = box_rate()
        market = MarketParams(-1.0, 1.0, box, box, box, box)
        gamma = critical_constants(market).gamma_cr
        coarse = verify_equilibrium(fixed_point_single(market, gamma, dr=1e-3), market)
        fine = verify_equilibrium(fixed_point_single(market, gamma, dr=5e-4), market)
        assert coarse.max_residual < 1e-5
        assert coarse.max_residual / fine.max_residual >= 3.5
