import math

import numpy as np
import pytest

from oscillab.oio import (OioSpec, apply_adjoint, apply_oio, compose_pseudo, export_kernel_csv,
                          frequency_split, kernel_slice, lowfreq_kernel_decay)
from oscillab.spectral import Grid, GridFunction, NonFiniteError
from oscillab.symbols import amplitude_preset, phase_preset


@pytest.fixture
def g():
    return Grid(1, 4 * math.pi, 256)


def _spec(phase, amp, g):
    return OioSpec(phase_preset(phase), amplitude_preset(amp), g)


def test_identity_operator(g):
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.standard_normal(g.N))
    out = apply_oio(_spec("linear", "one", g), f, method="direct")
    assert np.max(np.abs(out.values - f.values)) < 1e-12


def test_direct_matches_fft(g):
    spec = _spec("power:2", "bessel:-1", g)
    f = GridFunction.from_callable(g, lambda x: np.exp(-x**2))
    a = apply_oio(spec, f, method="direct").values
    b = apply_oio(spec, f, method="fft").values
    assert np.max(np.abs(a - b)) < 1e-11


def test_linearity_and_adjoint(g):
    spec = _spec("kg:0.1", "cosx:0.5", g)
    rng = np.random.default_rng(1)
    f, h = (rng.standard_normal((2, g.N)) + 1j * rng.standard_normal((2, g.N)))
    Tf, Th = apply_oio(spec, f[None])[0], apply_oio(spec, h[None])[0]
    Tsum = apply_oio(spec, (2 * f - 3j * h)[None])[0]
    assert np.max(np.abs(Tsum - (2 * Tf - 3j * Th))) < 1e-10
    lhs = np.vdot(h, Tf)
    rhs = np.vdot(apply_adjoint(spec, h[None])[0], f)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs) + 1e-12


def test_fft_method_needs_multiplier(g):
    with pytest.raises(ValueError):
        apply_oio(_spec("kg:0.1", "one", g), np.zeros((1, g.N)), method="fft")


def test_nonfinite_input(g):
    bad = np.zeros(g.N)
    bad[0] = np.inf
    with pytest.raises(NonFiniteError):
        apply_oio(_spec("linear", "one", g), bad[None])


def test_workers_do_not_change_results(g):
    spec = _spec("sio1d", "sio:1", g)
    f = np.random.default_rng(2).standard_normal((3, g.N))
    assert np.array_equal(apply_oio(spec, f, workers=1), apply_oio(spec, f, workers=4))


def test_frequency_split_sums_to_amplitude():
    a = amplitude_preset("bessel:0")
    low, mid, high = frequency_split(a, 8.0)
    xi = np.linspace(-40, 40, 801)[None]
    x = np.zeros((1, 1))
    total = low(x, xi) + mid(x, xi) + high(x, xi)
    assert np.max(np.abs(total - a(x, xi))) < 1e-12


def test_kernel_slice_and_export(tmp_path):
    g = Grid(1, 2 * math.pi, 256)
    ks = kernel_slice(_spec("linear", "one", g), 3, (0,))
    assert ks.values.shape == (g.N, g.N)
    assert ks.sup > 0
    export_kernel_csv(ks, tmp_path / "k.csv")
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "x,y,absK,argK"
    assert len(lines) == g.N * g.N + 1


def test_dispersive_kernel_stays_below_bound():
    # the pointwise bound holds but is not attained for power-type phases
    g = Grid(1, 2 * math.pi, 1024)
    spec = _spec("power:2", "one", g)
    vals = [kernel_slice(spec, j, (0,), store_rows=[]).normalized for j in range(1, 7)]
    assert max(vals) <= 1.0
    assert vals[-1] < vals[0]


def test_lowfreq_decay_requires_lf():
    with pytest.raises(ValueError):
        lowfreq_kernel_decay(phase_preset("power:1/2"), amplitude_preset("one"), mu=1.0,
                             grid=Grid(1, 512.0, 1024))


def test_compose_multiplier_amplitude_is_exact():
    g = Grid(1, 2 * math.pi, 256)
    spec = _spec("power:2", "one", g)
    res = compose_pseudo(lambda xi: np.exp(-xi**2), 0.25, spec, 3)
    assert res.relative_remainder < 1e-12
