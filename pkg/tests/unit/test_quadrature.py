"""Unit tests for adaptive quadrature."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from kinetic_market.models.data import CompactRateFunction
from kinetic_market.models.errors import NonConvergence
from kinetic_market.utils.quadrature import cumulative_integral, integrate, integrate_pieces


class TestIntegrate:
    """Test suite for integrate."""

    def test_exponential(self):
        assert integrate(lambda x: math.exp(-x), 0.0, 1.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-10)

    def test_empty_interval(self):
        assert integrate(math.sin, 2.0, 2.0) == 0.0

    def test_reversed_limits_rejected(self):
        with pytest.raises(ValueError):
            integrate(math.sin, 1.0, 0.0)

    def test_indicator_converges(self):
        value = integrate(lambda x: 1.0 if 0.0 <= x <= 1.0 else 0.0, -0.3, 2.0)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_agrees_with_scipy(self):
        f = lambda x: math.exp(-x * x) * math.cos(3.0 * x)
        expected, _ = quad(f, 0.0, 4.0, epsabs=1e-12)
        assert integrate(f, 0.0, 4.0) == pytest.approx(expected, abs=1e-9)

    def test_depth_limit_raises(self):
        with pytest.raises(NonConvergence):
            integrate(lambda x: 1.0 / math.sqrt(abs(x - 0.3)) if x != 0.3 else 0.0,
                      0.0, 1.0, tol=1e-14, max_depth=6)


class TestPiecewise:
    """Panel-wise integration over breakpoints."""

    def test_integrate_pieces_matches_total(self):
        f = CompactRateFunction((0.0, 0.5, 2.0), (1.0, 2.0, 0.0))
        assert integrate_pieces(f, f.breakpoints) == pytest.approx(f.total(), abs=1e-12)

    def test_cumulative_integral_matches_antiderivative(self):
        f = CompactRateFunction((0.0, 0.5, 2.0), (1.0, 2.0, 0.0))
        grid = np.linspace(0.0, 3.0, 31)
        table = cumulative_integral(f, grid, f.breakpoints, support_end=f.support_radius)
        np.testing.assert_allclose(table, f.antiderivative(grid), atol=1e-10)

    def test_cumulative_integral_constant_beyond_support(self):
        grid = np.linspace(0.0, 5.0, 11)
        table = cumulative_integral(lambda x: 1.0, grid, support_end=2.0)
        assert table[4] == pytest.approx(2.0)
        assert table[-1] == pytest.approx(2.0)
