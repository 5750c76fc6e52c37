"""Unit tests for the moving-boundary fluid solver."""

import numpy as np
import pytest

from kinetic_market.kinetics.fluid import (
    FluidState,
    NetworkFluidState,
    annihilation_flux,
    boundary_fluxes,
    boundary_velocity,
    boundary_velocity_general,
    run_fluid,
    step_network,
    step_recycling,
    step_single,
)
from kinetic_market.models.data import CompactRateFunction, MarketParams, NetworkSpec, VelocityProfile
from kinetic_market.models.errors import CflViolation, NoMassAtBoundary
from tests.conftest import make_box_market


def idle_market() -> MarketParams:
    zero = CompactRateFunction.zero()
    return MarketParams(-1.0, 1.0, zero, zero, zero, zero)


def box_state(height: float = 1.0, width: float = 0.5, dr: float = 0.01, r_max: float = 2.0) -> FluidState:
    r = (np.arange(int(round(r_max / dr))) + 0.5) * dr
    rho = np.where(r < width, height, 0.0)
    return FluidState(dr, rho.copy(), rho.copy())


class TestBoundaryVelocity:
    """Closed-form boundary velocity of two monokinetic phases."""

    def test_symmetric_densities(self):
        assert boundary_velocity(1.0, 1.0, -1.0, 1.0) == (0.0, False)

    def test_arithmetic_example(self):
        beta, degenerate = boundary_velocity(1.0, 3.0, -2.0, 1.0)
        assert beta == pytest.approx(0.25)
        assert not degenerate

    def test_single_phase_limit(self):
        beta, _ = boundary_velocity(2.0, 0.0, -1.5, 1.0)
        assert beta == -1.5

    def test_degenerate_falls_back_to_midpoint(self):
        beta, degenerate = boundary_velocity(0.0, 0.0, -3.0, 1.0)
        assert degenerate
        assert beta == pytest.approx(-1.0)


class TestBoundaryVelocityGeneral:
    """Flux balance for velocity-distributed boundary traces."""

    def test_delta_like_profiles_match_closed_form(self):
        fp = VelocityProfile.delta_like(-1.5, 1.0, 2.0)
        fm = VelocityProfile.delta_like(1.0, 3.0, 2.0)
        expected, _ = boundary_velocity(1.0, 3.0, -1.5, 1.0)
        assert boundary_velocity_general(fp, fm) == pytest.approx(expected, abs=1e-10)

    def test_mirror_symmetric_profiles(self):
        fp = VelocityProfile.uniform(-0.9, -0.2, 1.0, 1.0)
        assert boundary_velocity_general(fp, fp.mirrored()) == pytest.approx(0.0, abs=1e-10)

    def test_flat_balance_takes_largest_zero(self):
        # g vanishes on [-2, -1]: no (+) mass moves faster than the boundary there
        fp = VelocityProfile.uniform(-1.0, -0.5, 1.0, 2.0)
        beta = boundary_velocity_general(fp, VelocityProfile.zero(2.0))
        assert beta == pytest.approx(-1.0, abs=1e-8)
        m_plus, _ = boundary_fluxes(fp, VelocityProfile.zero(2.0), beta)
        assert m_plus == pytest.approx(0.0, abs=1e-10)

    def test_flat_stretch_below_plus_support_is_skipped(self):
        fp = VelocityProfile.uniform(-1.0, -0.5, 1.0, 2.0)
        zero = VelocityProfile.zero(2.0)
        for flat in (-2.0, -1.5, -1.0):
            m_plus, m_minus = boundary_fluxes(fp, zero, flat)
            assert m_plus - m_minus == pytest.approx(0.0, abs=1e-12)
        beta = boundary_velocity_general(fp, zero)
        assert beta > -1.0 - 1e-8
        m_plus, _ = boundary_fluxes(fp, zero, beta + 0.01)
        assert m_plus > 0.0

    def test_only_minus_mass_takes_smallest_zero(self):
        fm = VelocityProfile.uniform(0.5, 1.0, 1.0, 2.0)
        beta = boundary_velocity_general(VelocityProfile.zero(2.0), fm)
        assert beta == pytest.approx(1.0, abs=1e-8)

    def test_no_mass(self):
        with pytest.raises(NoMassAtBoundary):
            boundary_velocity_general(VelocityProfile.zero(1.0), VelocityProfile.zero(1.0))

    def test_fluxes_are_monotone(self):
        fp = VelocityProfile.uniform(-0.8, 0.1, 0.7, 1.0)
        fm = VelocityProfile.uniform(-0.3, 0.9, 1.3, 1.0)
        betas = np.linspace(-1.0, 1.0, 81)
        fluxes = np.array([boundary_fluxes(fp, fm, b) for b in betas])
        assert np.all(np.diff(fluxes[:, 0]) >= -1e-14)
        assert np.all(np.diff(fluxes[:, 1]) <= 1e-14)

    def test_flux_of_uniform_profile(self):
        fp = VelocityProfile.uniform(-0.9, -0.1, 0.8, 1.0)
        m_plus, m_minus = boundary_fluxes(fp, VelocityProfile.zero(1.0), 0.0)
        assert m_plus == pytest.approx(0.4, abs=1e-8)
        assert m_minus == 0.0


class TestAnnihilationFlux:
    """Annihilation flow at the boundary."""

    def test_unit_densities(self):
        assert annihilation_flux(box_state(), make_box_market()) == pytest.approx(1.0)

    def test_empty_minus_phase(self):
        state = box_state()
        state = FluidState(state.dr, state.rho_plus, np.zeros_like(state.rho_minus))
        assert annihilation_flux(state, make_box_market()) == 0.0

    def test_both_forms_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            bp, bm = rng.uniform(0.01, 5.0, 2)
            v_plus, v_minus = -rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)
            beta, _ = boundary_velocity(bp, bm, v_plus, v_minus)
            nu_minus = (v_minus - beta) * bm
            nu_plus = -(v_plus - beta) * bp
            assert nu_minus == pytest.approx(nu_plus, rel=1e-14)


class TestStepSingle:
    """One explicit upwind step without recycling."""

    def test_eroding_boxes(self):
        dt = 0.004
        state = box_state()
        stepped = step_single(state, idle_market(), dt)
        assert stepped.beta == 0.0
        assert stepped.nu == pytest.approx(1.0)
        before = sum(state.masses())
        after = sum(stepped.masses())
        assert (before - after) / dt == pytest.approx(2.0)

    def test_empty_minus_phase_freezes_plus(self):
        state = box_state()
        state = FluidState(state.dr, state.rho_plus, np.zeros_like(state.rho_minus))
        stepped = step_single(state, idle_market(), 0.004)
        assert stepped.beta == -1.0
        np.testing.assert_array_equal(stepped.rho_plus, state.rho_plus)

    def test_balance_holds_each_step(self):
        state = FluidState(0.01, np.linspace(2.0, 0.0, 200), np.linspace(0.5, 0.0, 200))
        for _ in range(20):
            stepped = step_single(state, make_box_market(), 0.002)
            bp, bm = state.rho_plus[0], state.rho_minus[0]
            left = bp * (stepped.beta + 1.0)
            right = bm * (1.0 - stepped.beta)
            assert left == pytest.approx(right, rel=1e-12)
            state = stepped

    def test_position_follows_beta(self):
        state = FluidState(0.01, np.full(100, 3.0), np.full(100, 1.0), b=0.25)
        stepped = step_single(state, idle_market(), 0.004)
        assert stepped.beta == pytest.approx(-0.5)
        assert stepped.b == pytest.approx(0.25 - 0.5 * 0.004)
        assert stepped.t == pytest.approx(0.004)

    def test_mass_budget_closes(self):
        state = FluidState(0.01, np.linspace(1.0, 0.0, 150), np.linspace(1.0, 0.0, 150))
        stepped = step_single(state, make_box_market(), 0.005)
        budget = stepped.budget
        assert budget.residual < 1e-12
        assert budget.plus.arrivals == pytest.approx(0.005 * 1.0, rel=1e-6)
        assert budget.plus.outflow == pytest.approx(0.005 * 1.0 * 1.0)

    def test_densities_stay_nonnegative(self):
        r = (np.arange(100) + 0.5) * 0.01
        rho = np.where((r > 0.2) & (r < 0.3), 5.0, 0.0)
        state = FluidState(0.01, rho, rho[::-1].copy())
        for _ in range(100):
            state = step_single(state, make_box_market(), 0.004)
            assert state.rho_plus.min() >= 0.0
            assert state.rho_minus.min() >= 0.0

    def test_cfl_violation(self):
        with pytest.raises(CflViolation, match="exceeds"):
            step_single(box_state(), make_box_market(), 0.01)

    def test_extrapolation_tightens_the_bound(self):
        step_single(box_state(), make_box_market(), 0.008)
        with pytest.raises(CflViolation, match="negative"):
            step_single(box_state(), make_box_market(), 0.008, extrapolate=True)

    def test_non_positive_dt(self):
        with pytest.raises(ValueError):
            step_single(box_state(), make_box_market(), 0.0)

    def test_degenerate_boundary_flagged(self):
        state = FluidState(0.01, np.zeros(50), np.zeros(50))
        stepped = step_single(state, make_box_market(), 0.005)
        assert stepped.degenerate
        assert stepped.beta == 0.0


class TestStepRecycling:
    """Reinjection of annihilated mass."""

    def test_zero_kernels_reduce_to_single(self):
        zero = CompactRateFunction.zero()
        recycling = make_box_market(p_minus_plus=zero, p_plus_minus=zero)
        state = FluidState(0.01, np.linspace(1.5, 0.0, 120), np.linspace(1.0, 0.2, 120))
        a = step_recycling(state, recycling, 0.004)
        b = step_single(state, make_box_market(), 0.004)
        np.testing.assert_array_equal(a.rho_plus, b.rho_plus)
        np.testing.assert_array_equal(a.rho_minus, b.rho_minus)
        assert a.b == b.b

    def test_reinjected_mass_matches_flow(self, recycling_market):
        dt = 0.004
        state = box_state(width=1.5)
        stepped = step_recycling(state, recycling_market, dt)
        nu = stepped.nu
        assert stepped.budget.plus.reinjected == pytest.approx(dt * nu * 0.4, rel=1e-6)
        assert stepped.budget.minus.reinjected == pytest.approx(dt * nu * 0.2, rel=1e-6)
        assert stepped.budget.residual < 1e-12


class TestStepNetwork:
    """Jacobi-coupled network steps."""

    def test_one_market_network_matches_recycling(self, recycling_market):
        spec = NetworkSpec.from_market(recycling_market)
        state = FluidState(0.01, np.linspace(1.5, 0.0, 120), np.linspace(1.0, 0.2, 120))
        network = step_network(NetworkFluidState((state,)), spec, 0.004)
        single = step_recycling(state, recycling_market, 0.004)
        np.testing.assert_array_equal(network.markets[0].rho_plus, single.rho_plus)
        np.testing.assert_array_equal(network.markets[0].rho_minus, single.rho_minus)
        assert network.t == pytest.approx(0.004)

    def test_mirror_markets_stay_equal(self, mirrored_network):
        state = FluidState(0.01, np.linspace(1.0, 0.0, 150), np.linspace(1.0, 0.0, 150))
        network = NetworkFluidState((state, state))
        for _ in range(25):
            network = step_network(network, mirrored_network, 0.004)
        first, second = network.markets
        np.testing.assert_array_equal(first.rho_plus, second.rho_plus)
        np.testing.assert_array_equal(first.rho_minus, second.rho_minus)

    def test_executor_gives_identical_results(self, mirrored_network):
        from concurrent.futures import ThreadPoolExecutor

        a = FluidState(0.01, np.linspace(1.0, 0.0, 150), np.linspace(0.8, 0.0, 150))
        b = FluidState(0.01, np.linspace(0.6, 0.0, 150), np.linspace(1.2, 0.0, 150))
        serial = step_network(NetworkFluidState((a, b)), mirrored_network, 0.004)
        with ThreadPoolExecutor(max_workers=2) as pool:
            parallel = step_network(NetworkFluidState((a, b)), mirrored_network, 0.004, executor=pool)
        for s, p in zip(serial.markets, parallel.markets):
            np.testing.assert_array_equal(s.rho_plus, p.rho_plus)
            np.testing.assert_array_equal(s.rho_minus, p.rho_minus)

    def test_cfl_violation_names_market(self, mirrored_network):
        state = box_state()
        with pytest.raises(CflViolation) as info:
            step_network(NetworkFluidState((state, state)), mirrored_network, 0.01)
        assert info.value.context["market"] == 0


class TestRunFluid:
    """Multi-step integration."""

    def test_reaches_horizon_exactly(self, box_market):
        state = FluidState(0.01, np.linspace(1.0, 0.0, 200), np.linspace(1.0, 0.0, 200))
        final, series, snapshots = run_fluid(state, box_market, 0.1, 0.003, sample_every=10)
        assert final.t == pytest.approx(0.1)
        assert len(series.times) == 34
        assert len(snapshots) == 1 + 3

    def test_translation_invariance(self, box_market):
        rho = np.linspace(1.0, 0.0, 200)
        a, _, _ = run_fluid(FluidState(0.01, rho, rho * 0.5), box_market, 0.2, 0.004)
        b, _, _ = run_fluid(FluidState(0.01, rho, rho * 0.5, b=3.0), box_market, 0.2, 0.004)
        np.testing.assert_array_equal(a.rho_plus, b.rho_plus)
        np.testing.assert_array_equal(a.rho_minus, b.rho_minus)
        assert b.b - a.b == pytest.approx(3.0)

    def test_lab_positions(self):
        state = FluidState(0.1, np.ones(3), np.ones(3), b=0.3)
        plus, minus = state.lab_positions()
        np.testing.assert_allclose(plus, [0.35, 0.45, 0.55])
        np.testing.assert_allclose(minus, [0.25, 0.15, 0.05])

    def test_snapshot_rows(self):
        state = FluidState(0.5, np.array([1.0, 2.0]), np.array([3.0, 4.0]), b=1.0, t=0.2)
        rows = list(state.rows())
        assert rows[0] == (0.2, 1.0, 0.0, "plus", 0.25, 1.0)
        assert rows[-1] == (0.2, 1.0, 0.0, "minus", 0.75, 4.0)


def bump_state(dr: float, r_max: float = 3.0) -> FluidState:
    r = (np.arange(int(round(r_max / dr))) + 0.5) * dr
    rho = np.exp(-((r - 1.0) / 0.4) ** 2)
    return FluidState(dr, rho.copy(), rho.copy())


class TestConvergenceOrder:
    """Halving dr and dt roughly halves the error of the first-order scheme."""

    @staticmethod
    def l1_error(dr: float, reference: FluidState, T: float) -> float:
        final, _, _ = run_fluid(bump_state(dr), idle_market(), T, 0.4 * dr)
        factor = int(round(dr / reference.dr))
        coarse = reference.rho_plus.reshape(-1, factor).mean(axis=1)
        return float(np.abs(final.rho_plus - coarse).sum() * dr)

    def test_observed_order_on_smooth_bump(self):
        T, fine = 0.5, 0.00125
        reference, series, _ = run_fluid(bump_state(fine), idle_market(), T, 0.4 * fine)
        assert max(abs(beta) for beta in series.beta) < 1e-12
        coarse_error = self.l1_error(0.02, reference, T)
        fine_error = self.l1_error(0.01, reference, T)
        assert fine_error < coarse_error
        assert coarse_error / fine_error >= 1.8
