import math

import numpy as np
import pytest

from oscillab.experiments import (band_grid, config_hash, confirm_class,
                                  dispersive_estimate_report, estimate_band_norms,
                                  gaussian_schrodinger, propagate, propagator,
                                  sharpness_probe, sharpness_window, PROPAGATORS)
from oscillab.oio import OioSpec
from oscillab.spectral import Grid, GridFunction, lp_norm
from oscillab.symbols import amplitude_preset, phase_preset


@pytest.fixture
def gauss():
    g = Grid(1, 40.0, 512)
    return GridFunction.from_callable(g, lambda x: np.exp(-x**2 / 2))


def test_free_schrodinger_oracle(gauss):
    times = [-0.3, 0.2, 1.0]
    for t, u in zip(times, propagate("schrodinger", gauss, times)):
        assert np.max(np.abs(u.values - gaussian_schrodinger(gauss.grid.x1d, t))) < 1e-12


@pytest.mark.parametrize("name", sorted(PROPAGATORS))
def test_group_law_and_unitarity(name, gauss):
    s, t = 0.1, 0.25
    (u_s,) = propagate(name, gauss, [s])
    (u_st,) = propagate(name, u_s, [t])
    (u_sum,) = propagate(name, gauss, [s + t])
    tol = 1e-10 if name != "ho" else 1e-8
    assert np.max(np.abs(u_st.values - u_sum.values)) < tol
    assert lp_norm(u_sum, 2) == pytest.approx(lp_norm(gauss, 2), rel=1e-8)


def test_harmonic_oscillator_first_excited_state(gauss):
    x = gauss.grid.x1d
    f1 = GridFunction(gauss.grid, x * np.exp(-x**2 / 2))
    (u,) = propagate("ho", f1, [0.3])
    assert np.max(np.abs(u.values - np.exp(-0.9j) * f1.values)) < 1e-10


def test_ho_time_limit(gauss):
    with pytest.raises(ValueError):
        propagate("ho", gauss, [0.8])


def test_presets_confirm_class():
    for name in PROPAGATORS:
        assert confirm_class(propagator(name))
    with pytest.raises(ValueError):
        propagator("heat")


def test_config_hash_is_stable():
    a = config_hash({"b": 1, "a": [1, 2.5]})
    assert a == config_hash({"a": [1, 2.5], "b": 1})
    assert a != config_hash({"a": [1, 2.5], "b": 2})


def test_band_grid_covers_band():
    phi = phase_preset("power:2")
    for j in (2, 5):
        g = band_grid(phi, j)
        assert g.xi_max >= 2.0 ** (j + 2)
        # the chirp travel |grad g| = 2|xi| fits inside the box
        assert g.L >= 2 * 2.0 ** (j + 1)


def test_band_report_csv_and_l2_isometry():
    g = Grid(1, 4 * math.pi, 512)
    spec = OioSpec(phase_preset("power:2"), amplitude_preset("one"), g)
    rep = estimate_band_norms(spec, 2.0, range(0, 5), n_samples=3, seed=4, family="random_band")
    lines = rep.to_csv().splitlines()
    assert lines[0] == "j,ratio,slope,samples,discarded,L,N"
    assert len(lines) == 6
    # unimodular multiplier: ||T psi_j f||_2 <= ||Psi_j f||_2
    assert max(rep.ratios) <= 1 + 1e-12
    assert abs(rep.slope) < 0.1


def test_estimate_band_norms_rejects_bad_input():
    g = Grid(1, 4 * math.pi, 256)
    spec = OioSpec(phase_preset("linear"), amplitude_preset("one"), g)
    with pytest.raises(ValueError):
        estimate_band_norms(spec, 2.0, family="gaussian")
    with pytest.raises(ValueError):
        estimate_band_norms(spec, 2.0, range(0, 9), adaptive=False)


def test_sharpness_window():
    lo, hi = sharpness_window(2, -0.5, 1.0)
    assert lo == 0 and hi == pytest.approx(0.5)
    lo, hi = sharpness_window(2, -1.0, 1.0)
    assert lo >= hi
    with pytest.raises(ValueError, match="needs lambda <"):
        sharpness_probe(2, -0.5, 1.0, 0.7, range(4, 6))
    with pytest.raises(ValueError, match="needs lambda >"):
        sharpness_probe(2, -0.5, 2.0, -0.1, range(4, 6))


def test_sharpness_control_mode():
    probe = sharpness_probe(2, -1.0, 1.0, 0.1, range(4, 6))
    assert probe.mode == "control"
    assert probe.to_csv().splitlines()[0] == "J,ratio,f_norm,Tf_norm,L,N"


def test_dispersive_l2_is_isometric():
    rep = dispersive_estimate_report("capillary", 0.0, 2.0, 2.0, n_samples=2,
                                     j_range=range(0, 5))
    assert rep.besov_max == pytest.approx(1.0, abs=1e-9)
    assert rep.besov_min == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        dispersive_estimate_report("schrodinger", 0.0, 2.0, 2.0, times=(2.0,))
    with pytest.raises(ValueError):
        dispersive_estimate_report("ho", 0.0, 2.0, 2.0)
