import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillab.decompositions import (Psi_j, build_lp_basis, directional_partition,
                                     directional_weights, export_basis_csv, lp_piece,
                                     max_band, psi0_profile, psi_j, second_decomposition,
                                     smooth_step)
from oscillab.spectral import Grid, GridFunction


def test_profile_support():
    r = np.linspace(0, 3, 3001)
    p = psi0_profile(r)
    assert np.all(p[r <= 1] == 1)
    assert np.all(p[r >= 2] == 0)
    assert np.all(np.diff(p) <= 0)


def test_smooth_step_is_smooth_monotone():
    t = np.linspace(-1, 2, 1001)
    s = smooth_step(t)
    assert s[0] == 0 and s[-1] == 1
    assert np.all(np.diff(s) >= 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.0, max_value=1e4))
def test_partition_of_unity_pointwise(r):
    J = 16
    total = sum(psi_j(j, np.array(r)) for j in range(J + 1))
    assert abs(total - 1) < 1e-12


def test_band_supports():
    r = np.linspace(0, 100, 100001)
    for j in range(1, 5):
        on = psi_j(j, r) != 0
        assert r[on].min() > 2.0 ** (j - 1) - 1e-9
        assert r[on].max() < 2.0 ** (j + 1) + 1e-9


def test_Psi_equals_one_on_support():
    r = np.linspace(0, 200, 200001)
    for j in range(0, 6):
        on = psi_j(j, r) > 0
        assert np.max(np.abs(Psi_j(j, r)[on] - 1)) < 1e-14


def test_basis_resolution_checks():
    g = Grid(1, 2 * math.pi, 64)
    jm = max_band(g)
    build_lp_basis(jm, g)
    with pytest.raises(ValueError):
        build_lp_basis(jm + 1, g)


def test_lp_pieces_sum_to_function():
    g = Grid(1, 40.0, 1024)
    f = GridFunction.from_callable(g, lambda x: np.exp(-x**2))
    basis = build_lp_basis(max_band(g), g)
    total = sum(lp_piece(f, j, basis).values for j in range(basis.j_max + 1))
    assert np.max(np.abs(total - f.values)) < 1e-12


def test_second_decomposition_2d():
    g = Grid(2, 2 * math.pi, 64)
    sd = second_decomposition(2, g)
    on = psi_j(2, g.xi_abs) > 0
    assert np.max(np.abs(sd.chi_sum()[on] - 1)) < 1e-12
    # the number of balls grows like 2^{jn}
    assert 2**4 <= sd.count <= 20 * 2**4


def test_directional_partition():
    g = Grid(2, 2 * math.pi, 64)
    dp = directional_partition(3.0, g)
    assert len(dp.lam) == 4
    far = g.xi_abs >= 3.0
    assert np.max(np.abs(sum(dp.lam)[far] - 1)) < 1e-12
    # +e_1 weight dominates on the positive xi_1 axis
    w = directional_weights(np.array([[10.0], [0.0]]), 3.0)
    assert w[0][0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        directional_partition(0.5, g)


def test_export_basis_csv(tmp_path):
    g = Grid(1, 2 * math.pi, 32)
    basis = build_lp_basis(max_band(g), g)
    export_basis_csv(basis, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0].startswith("xi,psi_0")
    assert len(lines) == g.N + 1
