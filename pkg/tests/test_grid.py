import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from giant_vortex.grid import (
    RadialField,
    RadialGrid,
    build_grid,
    build_window_grid,
    integrate_rdr,
    normalize,
)


class _Mode:
    def __init__(self, R_n, h_n):
        self.R_n, self.h_n = R_n, h_n


def test_build_grid_interval():
    g = build_grid(_Mode(1.0, 0.05), 15, 40)
    assert g.r_min == pytest.approx(0.25) and g.r_max == pytest.approx(1.75)
    assert g.n_points == 600


def test_build_grid_clamps_left_end():
    g = build_grid(_Mode(1.0, 0.2), 15, 40)
    assert g.r_min == 0.02


def test_doubling_points_halves_spacing():
    a = build_grid(_Mode(1.0, 0.05), 15, 40)
    b = build_grid(_Mode(1.0, 0.05), 15, 80)
    assert b.spacing == pytest.approx(a.spacing * (a.n_points - 1) / (b.n_points - 1))
    assert b.spacing / a.spacing == pytest.approx(0.5, rel=2e-3)


def test_rejects_narrow_window():
    with pytest.raises(ValueError):
        build_grid(_Mode(1.0, 0.05), 5, 40)


def test_window_grid_covers_every_mode():
    g = build_window_grid([0.9, 1.1], [0.05, 0.06], 15, 40)
    assert g.r_min == pytest.approx(0.9 - 0.75) and g.r_max == pytest.approx(1.1 + 0.9)


@pytest.mark.parametrize("bad", [(0.0, 1.0, 100), (1.0, 0.5, 100), (0.1, 1.0, 63)])
def test_grid_invariants(bad):
    with pytest.raises(ValueError):
        RadialGrid(*bad)


def test_integrate_examples():
    g = RadialGrid(1e-9, 1.0, 10001)
    assert integrate_rdr(np.ones(g.n_points), g) == pytest.approx(0.5, abs=1e-8)
    assert integrate_rdr(np.zeros(g.n_points), g) == 0.0
    g = RadialGrid(0.02, 10.0, 4001)
    oracle = quad(lambda r: math.exp(-r * r) * r, 0.02, 10.0)[0]
    val = integrate_rdr(np.exp(-g.r**2), g)
    assert val == pytest.approx(oracle, rel=1e-5)  # trapezoid, spacing 2.5e-3
    assert val == pytest.approx(0.4998, abs=1e-4)


def test_integrate_length_mismatch():
    with pytest.raises(ValueError):
        integrate_rdr(np.ones(10), RadialGrid(0.1, 1.0, 100))


def test_refinement_error_is_second_order():
    f = lambda r: np.exp(-((r - 1.0) ** 2) / 0.02)  # noqa: E731
    exact = quad(lambda r: f(r) * r, 0.5, 1.5, epsabs=1e-14)[0]
    g = RadialGrid(0.5, 1.5, 101)
    e1 = abs(integrate_rdr(f(g.r), g) - exact)
    g2 = g.refine()
    e2 = abs(integrate_rdr(f(g2.r), g2) - exact)
    assert 3.5 < e1 / e2 < 4.5


def test_normalize_examples():
    h = 0.05
    g = RadialGrid(0.25, 1.75, 600)
    f = RadialField(g, np.exp(-((g.r - 1.0) ** 2) / (2 * h * h)))
    n = normalize(f)
    assert n.mass == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(normalize(n).values, n.values, rtol=0, atol=1e-12)
    assert np.allclose(normalize(RadialField(g, 7.0 * f.values)).values, n.values, atol=1e-14)
    pref = (2 * math.pi * h * math.sqrt(math.pi)) ** -0.5
    assert n.values.max() == pytest.approx(pref, rel=0.02)
    with pytest.raises(ValueError):
        normalize(RadialField(g, np.zeros(g.n_points)))


def test_field_csv_round_trip():
    g = RadialGrid(0.3, 1.7, 80)
    vals = np.exp(-((g.r - 1.0) ** 2)) * np.exp(1j * g.r)
    f = RadialField(g, vals)
    back = RadialField.from_csv(f.to_csv())
    assert back.grid == g
    assert np.array_equal(back.values, vals)
    assert RadialGrid.from_json(g.to_json()) == g


def test_field_length_invariant():
    with pytest.raises(ValueError):
        RadialField(RadialGrid(0.1, 1.0, 100), np.zeros(99))


@given(st.lists(st.floats(-10, 10), min_size=64, max_size=64),
       st.lists(st.floats(0, 10), min_size=64, max_size=64),
       st.floats(-5, 5))
def test_integrate_linear_and_monotone(a, b, c):
    g = RadialGrid(0.1, 2.0, 64)
    a, b = np.array(a), np.array(b)
    assert integrate_rdr(a + c * b, g) == pytest.approx(
        integrate_rdr(a, g) + c * integrate_rdr(b, g), abs=1e-9)
    assert integrate_rdr(a + b, g) >= integrate_rdr(a, g) - 1e-12


@given(st.lists(st.floats(-10, 10), min_size=64, max_size=64).filter(lambda v: max(map(abs, v)) > 1e-3))
def test_normalize_idempotent(v):
    g = RadialGrid(0.1, 2.0, 64)
    n = normalize(RadialField(g, np.array(v)))
    assert np.allclose(normalize(n).values, n.values, rtol=1e-12, atol=1e-14)
    assert n.mass == pytest.approx(1.0, abs=1e-10)
