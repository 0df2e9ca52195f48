"""Oscillatory integral operators on a grid.

The discrete operator is::

    T f(x_i) = sum_m exp(i phi(x_i, xi_m)) a(x_i, xi_m) fhat(xi_m) dxi^n / (2 pi)^n

with ``fhat`` from :func:`~oscillab.spectral.forward_transform`.  Direct
evaluation builds this matrix in row blocks.  When ``phi - x.xi`` and ``a``
do not depend on x the same matrix is diagonalised by the DFT, and the FFT
path gives the identical operator at O(N^n log N) cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp

from .decompositions import LPBasis, psi0_profile, psi_j
from .parallel import ordered_map
from .spectral import Grid, GridFunction, NonFiniteError, _fft_forward, _fft_inverse
from .symbols import (Amplitude, PhaseFunction, Psi0, check_lf, default_samples,
                      variables)

__all__ = [
    "OioSpec",
    "apply_oio",
    "apply_oio_spectrum",
    "apply_adjoint",
    "operator_symbol",
    "KernelSlice",
    "kernel_slice",
    "export_kernel_csv",
    "KernelDecay",
    "lowfreq_kernel_decay",
    "frequency_split",
    "CompositionResult",
    "compose_pseudo",
    "RemainderFit",
    "composition_remainder_rate",
    "annulus_bump",
]

_BLOCK = 2**21  # matrix entries evaluated per block


@dataclass(frozen=True)
class OioSpec:
    """Phase, amplitude and grid of an operator T_a^phi."""

    phase: PhaseFunction
    amp: Amplitude
    grid: Grid

    def __post_init__(self):
        if self.phase.n != self.grid.n or self.amp.n != self.grid.n:
            raise ValueError("phase, amplitude and grid dimensions differ")

    @property
    def is_multiplier(self) -> bool:
        return self.phase.is_multiplier and self.amp.is_multiplier


def _with_origin_limit(values: np.ndarray, xi: np.ndarray, func: Callable, what: str):
    """Replace non-finite values at xi = 0 by the value at a tiny offset
    (continuous extension); anything else non-finite is an error."""
    bad = ~np.isfinite(values)
    if not bad.any():
        return values
    zero = np.all(xi == 0, axis=0)
    shape = np.broadcast_shapes(values.shape, zero.shape)
    values = np.broadcast_to(values, shape)
    bad = np.broadcast_to(bad, shape)
    if np.any(bad & ~np.broadcast_to(zero, shape)):
        raise NonFiniteError(f"{what}: non-finite values away from xi = 0")
    shifted = xi.copy()
    shifted[0] = shifted[0] + np.where(zero, 1e-12, 0.0)
    out = np.where(bad, np.broadcast_to(func(shifted), shape), values)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{what}: no finite limit at xi = 0")
    return out


def _kernel_block(spec: OioSpec, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """exp(i phi) a on the block x (n, R, 1) by xi (n, 1, M)."""
    ph = np.real(spec.phase.compact(x, xi))
    ph = _with_origin_limit(ph, xi, lambda k: np.real(spec.phase.compact(x, k)), "phase")
    am = _with_origin_limit(spec.amp.compact(x, xi), xi,
                            lambda k: spec.amp.compact(x, k), "amplitude")
    shape = np.broadcast_shapes(x.shape[1:], xi.shape[1:])
    out = np.empty(shape, dtype=complex)
    np.cos(ph, out=out.real)
    np.sin(ph, out=out.imag)
    out *= am
    return out


def operator_symbol(spec: OioSpec) -> np.ndarray:
    """exp(i (phi - x.xi)) a on the frequency lattice for multiplier-type specs."""
    if not spec.is_multiplier:
        raise ValueError("operator depends on x; no multiplier symbol")
    g = spec.grid
    xi = g.xi_nodes
    zero = np.zeros((g.n,) + (1,) * g.n)
    return _kernel_block(spec, zero, xi)


def _as_batch(f, grid: Grid):
    if isinstance(f, GridFunction):
        if f.grid != grid:
            raise ValueError("grid mismatch between operator and input")
        if f.spectral:
            raise ValueError("expected a spatial grid function")
        return f.values[None], True
    arr = np.asarray(f, dtype=complex)
    if arr.shape == grid.shape:
        return arr[None], True
    if arr.shape[1:] != grid.shape:
        raise ValueError(f"expected trailing shape {grid.shape}, got {arr.shape}")
    return arr, False


def _wrap(out: np.ndarray, single: bool, f, grid: Grid):
    if single:
        return GridFunction(grid, out[0]) if isinstance(f, GridFunction) else out[0]
    return out


def _rows(grid: Grid):
    return grid.x_nodes.reshape(grid.n, -1)


def _resolve_method(spec: OioSpec, method: str) -> str:
    if method not in ("auto", "direct", "fft"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        return "fft" if spec.is_multiplier else "direct"
    if method == "fft" and not spec.is_multiplier:
        raise ValueError("fft evaluation needs an x-independent phase offset and amplitude")
    return method


def apply_oio(spec: OioSpec, f, method: str = "auto", workers: Optional[int] = None):
    """Apply T_a^phi to ``f`` (a GridFunction or a batch array ``(B, *grid.shape)``)."""
    g = spec.grid
    batch, single = _as_batch(f, g)
    if not np.all(np.isfinite(batch)):
        raise NonFiniteError("apply_oio input has non-finite values")
    out = apply_oio_spectrum(spec, _fft_forward(batch, g), method, workers)
    return _wrap(out, single, f, g)


def apply_oio_spectrum(spec: OioSpec, fh: np.ndarray, method: str = "auto",
                       workers: Optional[int] = None) -> np.ndarray:
    """T_a^phi applied to data given by spectra ``fh`` of shape (B, *grid.shape).

    Frequencies where every spectrum vanishes exactly are skipped, which
    makes band-limited input cheap without changing the result.
    """
    g = spec.grid
    fh = np.asarray(fh, dtype=complex)
    if fh.shape[1:] != g.shape:
        raise ValueError(f"expected spectra of shape (B, {g.shape}), got {fh.shape}")
    if not np.all(np.isfinite(fh)):
        raise NonFiniteError("spectrum has non-finite values")
    if _resolve_method(spec, method) == "fft":
        return _fft_inverse(fh * operator_symbol(spec), g)

    B = fh.shape[0]
    fh_flat = fh.reshape(B, -1)
    active = np.flatnonzero(np.any(fh_flat != 0, axis=0))
    xi = g.xi_nodes.reshape(g.n, -1)[:, active]
    coeff = fh_flat[:, active].T * (g.dxi / (2 * np.pi)) ** g.n  # (M, B)
    X = _rows(g)
    R = X.shape[1]
    step = max(1, _BLOCK // max(1, len(active)))
    starts = list(range(0, R, step))

    def block(s):
        xb = X[:, s:s + step, None]
        return _kernel_block(spec, xb, xi[:, None, :]) @ coeff

    parts = ordered_map(block, starts, workers) if len(active) else []
    out = np.concatenate(parts, axis=0).T if parts else np.zeros((B, R), complex)
    return out.reshape((B,) + g.shape)


def apply_adjoint(spec: OioSpec, gfun, method: str = "auto", workers: Optional[int] = None):
    """Exact conjugate transpose of the discrete :func:`apply_oio` matrix."""
    g = spec.grid
    batch, single = _as_batch(gfun, g)
    if not np.all(np.isfinite(batch)):
        raise NonFiniteError("apply_adjoint input has non-finite values")
    method = _resolve_method(spec, method)
    if method == "fft":
        G = _fft_forward(batch, g) * np.conj(operator_symbol(spec))
        return _wrap(_fft_inverse(G, g), single, gfun, g)

    B = batch.shape[0]
    X = _rows(g)
    xi = g.xi_nodes.reshape(g.n, -1)
    M = xi.shape[1]
    gv = batch.reshape(B, -1).T * g.dx**g.n  # (R, B)
    step = max(1, _BLOCK // M)
    starts = list(range(0, X.shape[1], step))

    def block(s):
        E = _kernel_block(spec, X[:, s:s + step, None], xi[:, None, :])
        return E.conj().T @ gv[s:s + step]

    G = np.zeros((M, B), dtype=complex)
    for part in ordered_map(block, starts, workers):
        G += part
    out = _fft_inverse(G.T.reshape((B,) + g.shape), g)
    return _wrap(out, single, gfun, g)


# -- kernels ----------------------------------------------------------------

@dataclass
class KernelSlice:
    """Samples of ``d_y^beta K_j(x, y)`` for the stored x rows (all y)."""

    j: int
    beta: tuple
    grid: Grid
    rows: np.ndarray          # flat indices of the stored x nodes
    values: np.ndarray        # (len(rows), N^n)
    sup: float                # over every x row, stored or not
    order: float              # amplitude order m used for normalisation

    @property
    def normalized(self) -> float:
        """sup |d_y^beta K_j| / 2^{j (m + |beta| + n)}."""
        return self.sup / 2.0 ** (self.j * (self.order + sum(self.beta) + self.grid.n))


def _kernel_rows(spec: OioSpec, band: np.ndarray, xrows: np.ndarray, beta) -> np.ndarray:
    """Rows K(x_r, .) for x_r in ``xrows`` (n, R); ``band`` is the lattice cut-off."""
    g = spec.grid
    xi = g.xi_nodes
    R = xrows.shape[1]
    x = xrows.reshape((g.n, R) + (1,) * g.n)
    v = _kernel_block(spec, x, xi[:, None]) * band
    for i, b in enumerate(beta):
        if b:
            v = v * (-1j * xi[i]) ** b
    # sum_m v_m exp(-i y xi_m) dxi^n/(2 pi)^n  ==  conj(inverse DFT of conj v)
    return np.conj(_fft_inverse(np.conj(v), g)).reshape(R, -1)


def kernel_slice(spec: OioSpec, j: int, beta=None, basis: Optional[LPBasis] = None, *,
                 store_rows=None, max_stored: int = 2**22,
                 workers: Optional[int] = None) -> KernelSlice:
    """Kernel of T with amplitude a psi_j; every x row is scanned for the sup,
    rows are streamed and only ``store_rows`` (default: all that fit in
    ``max_stored`` entries, else the row at x = 0) are kept."""
    g = spec.grid
    beta = tuple(beta) if beta is not None else (0,) * g.n
    if len(beta) != g.n:
        raise ValueError("beta must have one entry per dimension")
    if basis is not None:
        if basis.grid != g:
            raise ValueError("basis lives on another grid")
        if not 0 <= j <= basis.j_max:
            raise ValueError(f"band {j} outside basis range 0..{basis.j_max}")
        band = basis.psi[j]
    else:
        if 2.0 ** (j + 1) > g.xi_max:
            raise ValueError(f"band {j} is not resolved by the grid")
        band = psi_j(j, g.xi_abs)
    X = _rows(g)
    total = X.shape[1]
    M = band.size
    if store_rows is None:
        store_rows = (np.arange(total) if total * M <= max_stored
                      else np.array([np.ravel_multi_index((g.N // 2,) * g.n, g.shape)]))
    store_rows = np.asarray(store_rows, dtype=int)
    keep = {int(r): i for i, r in enumerate(store_rows)}
    stored = np.zeros((len(store_rows), M), dtype=complex)
    step = max(1, _BLOCK // M)
    starts = list(range(0, total, step))

    def block(s):
        K = _kernel_rows(spec, band, X[:, s:s + step], beta)
        idx = [(keep[r], r - s) for r in range(s, min(s + step, total)) if r in keep]
        return float(np.max(np.abs(K))), [(i, K[r]) for i, r in idx]

    sup = 0.0
    for bsup, rows in ordered_map(block, starts, workers):
        sup = max(sup, bsup)
        for i, row in rows:
            stored[i] = row
    return KernelSlice(j, beta, g, store_rows, stored, sup, float(spec.amp.m))


def export_kernel_csv(ks: KernelSlice, path) -> None:
    """Columns x.., y.., |K|, arg K for every stored row."""
    g = ks.grid
    X = _rows(g)
    Y = _rows(g)
    blocks = []
    for i, r in enumerate(ks.rows):
        vals = ks.values[i]
        xs = np.repeat(X[:, r:r + 1], Y.shape[1], axis=1)
        blocks.append(np.vstack([xs, Y, np.abs(vals), np.angle(vals)]).T)
    data = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, 2 * g.n + 2))
    if g.n == 1:
        names = ["x", "y"]
    else:
        names = [f"x{i + 1}" for i in range(g.n)] + [f"y{i + 1}" for i in range(g.n)]
    np.savetxt(path, data, delimiter=",", header=",".join(names + ["absK", "argK"]),
               comments="", fmt="%.17g")


@dataclass
class KernelDecay:
    """Far-field power-law fit of |K(x0, y)| against <x0 - y>."""

    exponent: float
    fit_range: tuple
    requested_range: tuple
    shrunk: bool
    envelope: np.ndarray = field(repr=False)   # (bins, 2): <z>, max |K|
    lf_verdict: Optional[bool] = None


def lowfreq_kernel_decay(phase: PhaseFunction, amp: Optional[Amplitude] = None, *,
                         mu: Optional[float] = None, grid: Optional[Grid] = None,
                         x0: float = 0.0, far=(16.0, 512.0), bins: int = 24,
                         floor: float = 1e-13) -> KernelDecay:
    """Decay exponent of the kernel of T with amplitude psi_0(xi) a(x, xi).

    ``|K(x0, y)|`` is computed on a 1D row, the envelope is the maximum of
    ``|K|`` over logarithmic bins of ``|x0 - y|`` in ``far`` and the exponent
    is minus the least-squares slope of log envelope against log <x0 - y>
    over the outer third of the usable bins.
    Bins under ``floor`` (relative to max |K|) are dropped; with fewer than
    two bins left the decay is reported as infinite.
    """
    if phase.n != 1:
        raise ValueError("kernel decay is measured on 1D slices")
    grid = grid or Grid(1, 8192.0, 16384)
    if 2 * far[1] > grid.L:
        raise ValueError("far-field range does not fit in the periodic box")
    if amp is None:
        amp = Amplitude(1, sp.Integer(1), name="one")
    lf_ok = None
    if mu is not None:
        lf_ok = check_lf(phase, mu, default_samples(1)).verdict
        if not lf_ok:
            raise ValueError(f"phase {phase.name} fails the LF({mu:g}) check")
    spec = OioSpec(phase, amp, grid)
    band = psi0_profile(grid.xi_abs)
    K = _kernel_rows(spec, band, np.array([[x0]]), (0,))[0]
    z = np.abs(grid.x1d - x0)
    edges = np.geomspace(far[0], far[1], bins + 1)
    top = float(np.max(np.abs(K)))
    env = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (z >= lo) & (z < hi)
        if sel.any():
            env.append((math.sqrt(1 + (lo * hi)), float(np.max(np.abs(K[sel])))))
    env = np.array(env)
    ok = env[:, 1] > floor * top
    shrunk = not ok.all()
    if ok.sum() < 2:
        return KernelDecay(math.inf, (far[0], far[0]), tuple(far), True, env, lf_ok)
    # leading run of bins above the floor, then its outer third (at least 3 bins)
    last = int(np.argmin(ok)) if shrunk else len(ok)
    use = env[:last] if last >= 2 else env[ok]
    use = use[-max(3, len(use) // 3):]
    slope = np.polyfit(np.log(use[:, 0]), np.log(use[:, 1]), 1)[0]
    rng = (float(use[0, 0]), float(use[-1, 0]))
    return KernelDecay(float(-slope), rng, tuple(far), shrunk, env, lf_ok)


# -- frequency splitting and composition --------------------------------------

def _scaled_psi0(n, scale):
    _, xis = variables(n)
    return Psi0(sp.sqrt(sum(v**2 for v in xis)) / scale)


def frequency_split(a: Amplitude, R: float):
    """(a_L, a_M, a_H) = (psi_0 a, (psi_0(./R) - psi_0) a, (1 - psi_0(./R)) a)."""
    if not R > 1:
        raise ValueError(f"split radius must exceed 1, got {R}")
    n = a.n
    cut = [_scaled_psi0(n, 1), _scaled_psi0(n, sp.nsimplify(R))]
    facs = [cut[0], cut[1] - cut[0], 1 - cut[1]]
    names = ["low", "mid", "high"]
    meta = dict(m=a.m, rho=a.rho, delta=a.delta)
    if a.symbolic:
        return tuple(Amplitude(n, f * a.expr, name=f"{a.name}|{nm}", **meta)
                     for f, nm in zip(facs, names))

    def piece(which):
        def fn(x, xi):
            r = np.sqrt(np.sum(np.asarray(xi) ** 2, axis=0))
            p0, pR = psi0_profile(r), psi0_profile(r / R)
            w = (p0, pR - p0, 1 - pR)[which]
            return w * a.func(x, xi)
        return fn

    return tuple(Amplitude(n, func=piece(i), name=f"{a.name}|{nm}", fd_step=a.fd_step, **meta)
                 for i, nm in enumerate(names))


def annulus_bump(xi) -> np.ndarray:
    """psi(xi) = psi_0(xi/2) - psi_0(xi), the first annulus function."""
    r = np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2, axis=0))
    return psi_j(1, r)


@dataclass
class CompositionResult:
    """sigma_t = leading + remainder on the lattice nodes of band j."""

    t: float
    j: int
    xi: np.ndarray          # (n, M) frequencies used
    sigma: np.ndarray       # (N^n, M)
    leading: np.ndarray
    remainder: np.ndarray

    @property
    def relative_remainder(self) -> float:
        lead = float(np.max(np.abs(self.leading)))
        return float(np.max(np.abs(self.remainder))) / lead if lead > 0 else math.inf


def compose_pseudo(b: Callable, t: float, spec: OioSpec, j: int,
                   workers: Optional[int] = None) -> CompositionResult:
    """Symbol of b(tD) T_a^phi restricted to frequencies in supp psi_j.

    ``b`` maps frequency arrays of shape (n, ...) to values.  For each
    lattice frequency xi the function x -> exp(i phi) a is filtered by
    ``b(t D)`` and multiplied back by exp(-i phi).
    """
    if not 0 < t <= 1:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    g = spec.grid
    if 2.0 ** (j + 1) > g.xi_max:
        raise ValueError(f"band {j} is not resolved by the grid")
    cols = np.flatnonzero(psi_j(j, g.xi_abs).ravel() > 0)
    xi = g.xi_nodes.reshape(g.n, -1)[:, cols]
    X = _rows(g)
    x = X[:, :, None]
    mult = np.asarray(b(t * g.xi_nodes), dtype=complex)
    step = max(1, _BLOCK // X.shape[1])
    starts = list(range(0, len(cols), step))

    def block(s):
        k = xi[:, None, s:s + step]
        ph = np.real(spec.phase(x, k))
        am = np.asarray(spec.amp(x, k), dtype=complex)
        u = (np.exp(1j * ph) * am).T.reshape((-1,) + g.shape)
        h = _fft_inverse(_fft_forward(u, g) * mult, g).reshape(u.shape[0], -1).T
        sig = np.exp(-1j * ph) * h
        grad = np.stack([np.real(spec.phase.derivative(x, k, (0,) * g.n, _unit(g.n, i)))
                         for i in range(g.n)])
        lead = np.asarray(b(t * grad), dtype=complex) * am
        return sig, lead

    parts = ordered_map(block, starts, workers)
    sigma = np.concatenate([p[0] for p in parts], axis=1)
    lead = np.concatenate([p[1] for p in parts], axis=1)
    return CompositionResult(t, j, xi, sigma, lead, sigma - lead)


def _unit(n, i):
    e = [0] * n
    e[i] = 1
    return tuple(e)


@dataclass
class RemainderFit:
    js: list
    relative: list
    slope: float

    def to_dict(self):
        return {"j": self.js, "relative_remainder": self.relative, "slope": self.slope}


def composition_remainder_rate(spec: OioSpec, b: Callable = annulus_bump,
                               js: Sequence[int] = range(3, 8),
                               workers: Optional[int] = None) -> RemainderFit:
    """Least-squares slope of log2(sup|r| / sup|leading|) against j, t = 2^-j."""
    js = list(js)
    rel = [compose_pseudo(b, 2.0**-j, spec, j, workers).relative_remainder for j in js]
    if any(r == 0 for r in rel):
        return RemainderFit(js, rel, -math.inf)
    slope = float(np.polyfit(js, np.log2(rel), 1)[0])
    return RemainderFit(js, rel, slope)
