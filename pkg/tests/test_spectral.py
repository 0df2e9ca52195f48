import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillab.spectral import (Grid, GridFunction, NonFiniteError, export_profile_csv,
                               forward_transform, frequency_multiplier, inverse_transform,
                               load_grid_function, lp_norm, save_grid_function)


@pytest.fixture
def g1():
    return Grid(1, 40.0, 1024)


def test_grid_nodes_centered(g1):
    assert g1.x1d[0] == pytest.approx(-20.0)
    assert g1.x1d[g1.N // 2] == pytest.approx(0.0, abs=1e-14)
    assert g1.xi1d[g1.N // 2] == 0.0
    assert g1.dx * g1.dxi * g1.N == pytest.approx(2 * math.pi)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(3, 1.0, 16)
    with pytest.raises(ValueError):
        Grid(1, -1.0, 16)


def test_gaussian_transform(g1):
    f = GridFunction.from_callable(g1, lambda x: np.exp(-x**2 / 2))
    F = forward_transform(f)
    exact = math.sqrt(2 * math.pi) * np.exp(-g1.xi1d**2 / 2)
    assert np.max(np.abs(F.values - exact)) < 1e-10


def test_gaussian_transform_2d():
    g = Grid(2, 30.0, 128)
    f = GridFunction.from_callable(g, lambda x1, x2: np.exp(-(x1**2 + x2**2) / 2))
    exact = 2 * math.pi * np.exp(-g.xi_abs**2 / 2)
    assert np.max(np.abs(forward_transform(f).values - exact)) < 1e-10


def test_plane_wave_single_mode(g1):
    k = 7
    xi0 = g1.xi1d[g1.N // 2 + k]
    f = GridFunction.from_callable(g1, lambda x: np.exp(1j * xi0 * x))
    F = forward_transform(f).values
    assert np.argmax(np.abs(F)) == g1.N // 2 + k
    assert abs(F[g1.N // 2 + k]) == pytest.approx(g1.L)
    F[g1.N // 2 + k] = 0
    assert np.max(np.abs(F)) < 1e-9


def test_round_trip_and_parseval(g1):
    rng = np.random.default_rng(3)
    f = GridFunction(g1, rng.standard_normal(g1.N) + 1j * rng.standard_normal(g1.N))
    F = forward_transform(f)
    assert np.max(np.abs(inverse_transform(F).values - f.values)) < 1e-12
    lhs = np.sum(np.abs(f.values) ** 2) * g1.dx
    rhs = np.sum(np.abs(F.values) ** 2) * g1.dxi / (2 * math.pi)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_lp_norm_gaussian(g1):
    f = GridFunction.from_callable(g1, lambda x: np.exp(-x**2 / 2))
    assert lp_norm(f, 2) == pytest.approx(math.pi**0.25, rel=1e-12)
    assert lp_norm(f, 1) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-12)
    assert lp_norm(f, math.inf) == 1.0
    assert isinstance(lp_norm(f, math.inf), float)


def test_lp_quasi_norm_scaling(g1):
    f = GridFunction.from_callable(g1, lambda x: np.exp(-x**2))
    assert lp_norm(3 * f, 0.5) == pytest.approx(3 * lp_norm(f, 0.5), rel=1e-12)
    with pytest.raises(ValueError):
        lp_norm(f, 0)


def test_nonfinite_guard(g1):
    vals = np.zeros(g1.N)
    vals[5] = np.nan
    with pytest.raises(NonFiniteError):
        forward_transform(GridFunction(g1, vals))


def test_multiplier_derivative(g1):
    f = GridFunction.from_callable(g1, lambda x: np.exp(-x**2 / 2))
    df = frequency_multiplier(f, lambda xi: 1j * xi)
    assert np.max(np.abs(df.values + g1.x1d * np.exp(-g1.x1d**2 / 2))) < 1e-10


def test_save_load_round_trip(tmp_path, g1):
    f = GridFunction.from_callable(g1, lambda x: np.exp(-x**2 + 1j * x))
    save_grid_function(f, tmp_path / "f.bin")
    h = load_grid_function(tmp_path / "f.bin")
    assert h.grid == g1 and not h.spectral
    assert np.array_equal(h.values, f.values)
    assert (tmp_path / "f.bin").stat().st_size == 16 * g1.N
    export_profile_csv(f, tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x,abs"


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=3, max_value=9), st.floats(min_value=1.0, max_value=100.0))
def test_round_trip_any_grid(log_n, L):
    g = Grid(1, L, 2**log_n)
    rng = np.random.default_rng(log_n)
    f = GridFunction(g, rng.standard_normal(g.N))
    back = inverse_transform(forward_transform(f)).values
    assert np.max(np.abs(back - f.values)) < 1e-12
