import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from photonz.errors import InvalidArgumentError
from photonz.measurement import sample_z
from photonz.spd import spd_curve, spd_point
from photonz.states import make_fock


def click_probability(n, t):
    """Oracle: numerically integrate the Gamma(n + 1, 1) density above t."""
    val, _ = integrate.quad(lambda z: z**n * math.exp(-z) / math.factorial(n), t, np.inf, epsabs=1e-14, epsrel=1e-13)
    return val


class TestPoint:
    def test_zero_threshold(self):
        p = spd_point(0.0)
        assert (p.efficiency, p.dark_count, p.ratio) == (1.0, 1.0, 1.0)

    def test_threshold_one(self):
        p = spd_point(1.0)
        assert p.efficiency == pytest.approx(2 / math.e, abs=1e-12)
        assert p.dark_count == pytest.approx(1 / math.e, abs=1e-12)
        assert p.ratio == pytest.approx(2.0, abs=1e-12)

    def test_threshold_five(self):
        p = spd_point(5.0)
        assert p.efficiency == pytest.approx(6 * math.exp(-5), abs=1e-12)
        assert p.efficiency == pytest.approx(0.040428, abs=1e-6)

    @pytest.mark.parametrize("t", np.linspace(0.0, 20.0, 21))
    def test_against_quadrature(self, t):
        p = spd_point(t)
        assert abs(p.efficiency - click_probability(1, t)) <= 1e-9
        assert abs(p.dark_count - click_probability(0, t)) <= 1e-9

    @settings(max_examples=100, deadline=None)
    @given(st.floats(min_value=0.0, max_value=50.0))
    def test_ratio_is_efficiency_over_dark_count(self, t):
        p = spd_point(t)
        assert p.ratio == pytest.approx(p.efficiency / p.dark_count, rel=1e-12)
        assert p.ratio >= 1.0

    @pytest.mark.parametrize("bad", [-0.1, float("nan"), float("inf")])
    def test_bad_threshold(self, bad):
        with pytest.raises(InvalidArgumentError):
            spd_point(bad)


class TestCurve:
    def test_grid(self):
        curve = spd_curve(0.0, 10.0, 201)
        assert len(curve) == 201
        assert curve[0].threshold == 0.0 and curve[-1].threshold == 10.0

    def test_monotone(self):
        curve = spd_curve(0.0, 20.0, 400)
        eff = np.array([p.efficiency for p in curve])
        dark = np.array([p.dark_count for p in curve])
        ratio = np.array([p.ratio for p in curve])
        assert np.all(np.diff(eff) < 0) and np.all(np.diff(dark) < 0) and np.all(np.diff(ratio) > 0)

    @pytest.mark.parametrize("args", [(1.0, 1.0, 5), (2.0, 1.0, 5), (0.0, 1.0, 1), (0.0, 1.0, 2.5), (-1.0, 1.0, 5)])
    def test_bad_arguments(self, args):
        with pytest.raises(InvalidArgumentError):
            spd_curve(*args)


@pytest.mark.parametrize("n,attr", [(1, "efficiency"), (0, "dark_count")])
@pytest.mark.parametrize("t", [0.5, 2.0, 5.0])
def test_monte_carlo_click_rate(n, attr, t):
    count = 200_000
    z = sample_z(make_fock(n), count, seed=int(10 * t) + n).values
    rate = np.mean(z > t)
    expected = getattr(spd_point(t), attr)
    assert abs(rate - expected) <= 4 * math.sqrt(expected * (1 - expected) / count)
