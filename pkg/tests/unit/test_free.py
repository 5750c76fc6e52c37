"""Unit tests for the free one-phase dynamics."""

import math

import numpy as np
import pytest

from kinetic_market.kinetics.free import FreeField, characteristics_value, evolve_free
from kinetic_market.models.errors import CflViolation, DomainViolation


def flat(X, V):
    return np.ones_like(X)


def bump(X, V):
    return np.exp(-4.0 * X * X)


class TestFreeField:
    """Grid construction and moments."""

    def test_cell_centres(self):
        field = FreeField.on_grid((-1.0, 1.0), 4, 1.0, 8, flat)
        np.testing.assert_allclose(field.x, [-0.75, -0.25, 0.25, 0.75])
        assert field.dv == pytest.approx(0.25)
        assert field.total_mass() == pytest.approx(4.0)
        assert field.slice_masses().sum() == pytest.approx(field.total_mass())

    def test_too_few_velocity_slices(self):
        with pytest.raises(ValueError, match="velocity slices"):
            FreeField.on_grid((-1.0, 1.0), 4, 1.0, 4, flat)

    def test_negative_initial_density(self):
        with pytest.raises(ValueError):
            FreeField.on_grid((-1.0, 1.0), 4, 1.0, 8, lambda X, V: X)

    def test_interior_mask(self):
        field = FreeField.on_grid((0.0, 10.0), 10, 1.0, 8, flat)
        mask = field.interior_mask(2.0)
        assert mask[:, 0].tolist() == [False, False, True, True, True, True, True, True, False, False]


class TestCharacteristics:
    """Closed-form solution along characteristics."""

    def setup_method(self):
        self.f0 = FreeField.on_grid((-1.0, 3.0), 40, 1.0, 8, flat)

    def test_indicator_death_rate(self):
        mu = lambda x, v: 1.0 if 0.0 <= x <= 1.0 else 0.0
        value = characteristics_value(self.f0, mu, 2.0, 1.0, 2.0)
        assert value == pytest.approx(math.exp(-1.0), abs=1e-8)

    def test_no_deaths_transports_initial_value(self):
        value = characteristics_value(self.f0, lambda x, v: 0.0, 1.0, 0.5, 1.0)
        assert value == pytest.approx(1.0)

    def test_at_time_zero(self):
        assert characteristics_value(self.f0, lambda x, v: 5.0, 1.0, 0.5, 0.0) == pytest.approx(1.0)

    def test_interpolant_built_once_per_field(self):
        first = self.f0.interpolator
        characteristics_value(self.f0, lambda x, v: 0.0, 1.0, 0.5, 1.0)
        characteristics_value(self.f0, lambda x, v: 0.0, 2.0, -0.5, 0.5)
        assert self.f0.interpolator is first
        evolved = evolve_free(self.f0, None, None, 0.1, 0.05)
        assert evolved.interpolator is not first

    def test_leaving_interval(self):
        with pytest.raises(DomainViolation):
            characteristics_value(self.f0, lambda x, v: 0.0, 2.5, 1.0, 4.0)


class TestEvolveFree:
    """Upwind integration of the free equation."""

    def test_cfl_violation(self):
        field = FreeField.on_grid((-1.0, 1.0), 20, 1.0, 8, flat)
        with pytest.raises(CflViolation):
            evolve_free(field, None, None, 0.5, 0.2)

    def test_no_interior_left(self):
        field = FreeField.on_grid((-1.0, 1.0), 20, 1.0, 8, flat)
        with pytest.raises(DomainViolation):
            evolve_free(field, None, None, 2.0, 0.05)

    def test_periodic_mass_conservation(self):
        field = FreeField.on_grid((-2.0, 2.0), 80, 1.0, 8, bump)
        evolved = evolve_free(field, None, None, 1.0, 0.04, periodic=True)
        assert evolved.total_mass() == pytest.approx(field.total_mass(), rel=1e-12)
        assert evolved.valid.all()
        assert evolved.t == pytest.approx(1.0)

    def test_constant_death_rate_decays_mass(self):
        field = FreeField.on_grid((-2.0, 2.0), 80, 1.0, 8, bump)
        mu = lambda X, V, t: 0.5 * np.ones_like(X)
        evolved = evolve_free(field, None, mu, 1.0, 0.01, periodic=True)
        # explicit Euler factor (1 - h mu)^n
        assert evolved.total_mass() == pytest.approx(field.total_mass() * 0.995 ** 100, rel=1e-10)

    def test_arrivals_add_mass(self):
        field = FreeField.on_grid((-2.0, 2.0), 40, 1.0, 8, lambda X, V: np.zeros_like(X))
        lam = lambda X, V, t: np.ones_like(X)
        evolved = evolve_free(field, lam, None, 0.5, 0.05, periodic=True)
        np.testing.assert_allclose(evolved.values, 0.5)

    def test_matches_characteristics_on_interior(self):
        field = FreeField.on_grid((-4.0, 4.0), 320, 1.0, 8, bump)
        mu = lambda X, V, t: 0.3 * np.ones_like(X)
        evolved = evolve_free(field, None, mu, 1.0, 0.0125)
        i = int(np.argmin(np.abs(evolved.x - 0.58)))
        j = evolved.v.size - 1
        exact = characteristics_value(field, lambda x, v: 0.3, float(evolved.x[i]), float(evolved.v[j]), 1.0)
        assert evolved.valid[i, j]
        assert evolved.values[i, j] == pytest.approx(exact, abs=0.02)
