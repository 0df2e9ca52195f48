"""Besov, Triebel-Lizorkin, Sobolev, local Hardy and local BMO (quasi-)norms
on periodic grids, plus a generator of h^p atoms."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import product

import numpy as np

from .decompositions import LPBasis, psi0_profile
from .spectral import (Grid, GridFunction, _fft_forward, _fft_inverse, _lp,
                       frequency_multiplier, lp_norm)

__all__ = [
    "SpaceSpec",
    "parse_space",
    "besov_norm",
    "triebel_norm",
    "sobolev_norm",
    "local_hardy_quasinorm",
    "local_bmo_norm",
    "mean_oscillations",
    "Atom",
    "make_atom",
    "space_norm",
    "band_pieces",
    "spectrum_pieces",
    "besov_from_pieces",
]

FAMILIES = ("Lp", "Besov", "TriebelLizorkin", "SobolevH", "LocalHardy", "LocalBMO")
_ALIASES = {
    "lp": "Lp", "l": "Lp",
    "b": "Besov", "besov": "Besov",
    "f": "TriebelLizorkin", "tl": "TriebelLizorkin", "triebel": "TriebelLizorkin",
    "h": "SobolevH", "sobolev": "SobolevH",
    "hp": "LocalHardy", "hardy": "LocalHardy",
    "bmo": "LocalBMO",
}


def _parse_exponent(text: str) -> float:
    text = text.strip().lower()
    if text in ("inf", "infinity", "oo"):
        return math.inf
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


@dataclass(frozen=True)
class SpaceSpec:
    family: str
    s: float = 0.0
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown space family {self.family!r}")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.family == "TriebelLizorkin" and math.isinf(self.p) and self.q != 2:
            raise ValueError("Triebel-Lizorkin norms need p < inf unless (p, q) = (inf, 2)")
        if self.family == "LocalHardy" and self.p > 1:
            raise ValueError("local Hardy quasi-norm is defined for 0 < p <= 1; use Lp")


def parse_space(text: str) -> SpaceSpec:
    """Parse strings such as ``"B:s=0.5,p=1,q=2"``, ``"Lp:p=4"`` or ``"hp:p=0.5"``.

    ``hp`` with p > 1 is identified with ``Lp``.
    """
    head, _, rest = text.partition(":")
    family = _ALIASES.get(head.strip().lower())
    if family is None:
        raise ValueError(f"unknown space {head!r} in {text!r}")
    params = {}
    for item in filter(None, (t.strip() for t in rest.split(","))):
        m = re.fullmatch(r"([spq])\s*=\s*(\S+)", item)
        if not m:
            raise ValueError(f"cannot parse {item!r} in {text!r}")
        params[m.group(1)] = _parse_exponent(m.group(2))
    if family == "LocalHardy" and params.get("p", 1.0) > 1:
        family = "Lp"
    if family == "LocalBMO":
        params.setdefault("p", math.inf)
    return SpaceSpec(family, **params)


def band_pieces(f: GridFunction, basis: LPBasis, coverage_tol: float = 1e-8) -> np.ndarray:
    """Stack of ``psi_j(D) f`` for j = 0..j_max, shape ``(j_max+1,) + grid.shape``."""
    if f.grid != basis.grid:
        raise ValueError("function and basis live on different grids")
    return spectrum_pieces(_fft_forward(f.values, f.grid), basis, coverage_tol)


def spectrum_pieces(fh: np.ndarray, basis: LPBasis, coverage_tol: float = 1e-8) -> np.ndarray:
    """:func:`band_pieces` starting from a spectrum sampled on the basis lattice."""
    grid = basis.grid
    total = np.sum(np.abs(fh) ** 2)
    if total > 0:
        missed = np.sum(np.abs(fh * basis.tail()) ** 2)
        if missed > coverage_tol**2 * total:
            raise ValueError(
                f"basis (j_max={basis.j_max}) misses a fraction "
                f"{math.sqrt(missed / total):.2e} of the spectrum")
    out = np.zeros((basis.j_max + 1,) + grid.shape, dtype=complex)
    # bands without spectral content stay exactly zero; skip their transforms
    live = [j for j, ps in enumerate(basis.psi) if np.any(ps * fh != 0)]
    if live:
        out[live] = _fft_inverse(np.stack([basis.psi[j] for j in live]) * fh, grid)
    return out


def besov_from_pieces(pieces: np.ndarray, grid: Grid, s: float, p: float, q: float) -> float:
    _check_pq(p, q)
    axes = tuple(range(1, grid.n + 1))
    band = _lp(pieces, p, grid.dx**grid.n, axes=axes)
    weights = 2.0 ** (s * np.arange(len(pieces)))
    return float(_weighted_sum(weights * band, q))


def _check_pq(p, q):
    if not (p > 0 and q > 0):
        raise ValueError(f"p and q must be positive, got p={p}, q={q}")


def _weighted_sum(terms: np.ndarray, q: float, axis=0):
    if math.isinf(q):
        return np.max(terms, axis=axis)
    m = np.max(terms, axis=axis, keepdims=True)
    m = np.where(m > 0, m, 1.0)
    return np.squeeze(m, axis=axis) * np.sum((terms / m) ** q, axis=axis) ** (1.0 / q)


def besov_norm(f: GridFunction, s: float, p: float, q: float, basis: LPBasis) -> float:
    """``( sum_j 2^{jqs} ||psi_j(D) f||_p^q )^{1/q}``, sup over j when q = inf."""
    _check_pq(p, q)
    return besov_from_pieces(band_pieces(f, basis), f.grid, s, p, q)


def triebel_norm(f: GridFunction, s: float, p: float, q: float, basis: LPBasis) -> float:
    """``|| ( sum_j 2^{jqs} |psi_j(D) f|^q )^{1/q} ||_p``."""
    _check_pq(p, q)
    pieces = band_pieces(f, basis)
    g = f.grid
    weights = 2.0 ** (s * np.arange(basis.j_max + 1))
    weights = weights.reshape((-1,) + (1,) * g.n)
    inner = _weighted_sum(weights * np.abs(pieces), q)
    return float(_lp(inner, p, g.dx**g.n))


def sobolev_norm(f: GridFunction, s: float, p: float) -> float:
    """``|| <D>^s f ||_p``."""
    g = f.grid
    return lp_norm(frequency_multiplier(f, (1 + g.xi_abs**2) ** (s / 2)), p)


def local_hardy_quasinorm(f: GridFunction, p: float, l_max: int | None = None) -> float:
    """``( int sup_t |psi_0(tD) f|^p dx )^{1/p}`` with t restricted to 2^{-l}.

    ``l_max`` defaults to the first level at which ``psi_0(2^{-l} xi) = 1`` on the
    whole lattice; finer t would only repeat ``f`` itself.
    """
    if not 0 < p <= 1:
        raise ValueError(f"local Hardy quasi-norm needs 0 < p <= 1, got {p}")
    g = f.grid
    r = g.xi_abs
    if l_max is None:
        l_max = max(0, int(np.ceil(np.log2(max(r.max(), 1.0)))))
    fh = _fft_forward(f.values, g)
    maximal = np.zeros(g.shape)
    for ell in range(l_max + 1):
        piece = _fft_inverse(fh * psi0_profile(r / 2.0**ell), g)
        np.maximum(maximal, np.abs(piece), out=maximal)
    return float(_lp(maximal, p, g.dx**g.n))


def _cube_width(grid: Grid, side: float) -> int:
    return int(round(side / grid.dx))


def mean_oscillations(f: GridFunction, l_max: int | None = None) -> dict:
    """Max mean oscillation over the grid-aligned dyadic cubes of each side.

    Cubes have side ``w dx`` with ``w = round(2^{-l} / dx)`` samples and are
    anchored at the origin; cubes cut by the box boundary are skipped.
    Returns ``{side: max oscillation}``.
    """
    g = f.grid
    out = {}
    ell = 0
    while l_max is None or ell <= l_max:
        side = 2.0**-ell
        w = _cube_width(g, side)
        if w < 2:
            break
        offset = (g.N // 2) % w
        count = (g.N - offset) // w
        if count == 0:
            ell += 1
            continue
        block = f.values
        sl = slice(offset, offset + count * w)
        if g.n == 1:
            cubes = block[sl].reshape(count, w)
            axes = (1,)
        else:
            cubes = block[sl, sl].reshape(count, w, count, w)
            axes = (1, 3)
        mean = cubes.mean(axis=axes, keepdims=True)
        osc = np.abs(cubes - mean).mean(axis=axes)
        out[w * g.dx] = float(osc.max())
        ell += 1
    return out


def local_bmo_norm(f: GridFunction, l_max: int | None = None) -> float:
    """Max dyadic mean oscillation (sides <= 1) plus ``||psi_0(D) f||_inf``."""
    g = f.grid
    osc = mean_oscillations(f, l_max)
    low = frequency_multiplier(f, psi0_profile(g.xi_abs))
    return max(osc.values(), default=0.0) + lp_norm(low, math.inf)


def space_norm(f: GridFunction, spec: SpaceSpec, basis: LPBasis | None = None) -> float:
    fam = spec.family
    if fam == "Lp":
        return lp_norm(f, spec.p)
    if fam == "SobolevH":
        return sobolev_norm(f, spec.s, spec.p)
    if fam == "LocalHardy":
        return local_hardy_quasinorm(f, spec.p)
    if fam == "LocalBMO":
        return local_bmo_norm(f)
    if basis is None:
        raise ValueError(f"{fam} norm needs a Littlewood-Paley basis")
    if fam == "Besov":
        return besov_norm(f, spec.s, spec.p, spec.q, basis)
    return triebel_norm(f, spec.s, spec.p, spec.q, basis)


@dataclass
class Atom:
    center: np.ndarray
    radius: float
    p: float
    function: GridFunction

    @property
    def moment_order(self) -> int:
        """Highest total degree whose moments must vanish (-1 when none)."""
        if self.radius > 1:
            return -1
        return int(math.floor(self.function.grid.n * (1 / self.p - 1) + 1e-12))

    @property
    def ball_volume(self) -> float:
        n = self.function.grid.n
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n


def _multi_indices(n: int, degree: int) -> list:
    return [a for a in product(range(degree + 1), repeat=n) if sum(a) <= degree]


def make_atom(grid: Grid, center, radius: float, p: float, seed: int) -> Atom:
    """Pseudo-random smooth h^p atom supported in ``B(center, radius)``.

    A bump times a random polynomial; when ``radius <= 1`` the moments up to
    order ``[n(1/p - 1)]`` are projected out (discretely exact), then the sup
    is scaled to ``|B|^{-1/p}``.
    """
    if not radius > 0:
        raise ValueError("atom radius must be positive")
    if not 0 < p <= 1:
        raise ValueError(f"atoms are defined for 0 < p <= 1, got {p}")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (grid.n,):
        raise ValueError(f"center must have {grid.n} coordinates")
    if radius < 4 * grid.dx:
        raise ValueError(f"grid spacing {grid.dx:.3g} too coarse for radius {radius:.3g}")
    if np.any(np.abs(center) + radius >= grid.L / 2):
        raise ValueError("atom support leaves the periodic box")

    rng = np.random.default_rng(seed)
    u = (grid.x_nodes - center.reshape((-1,) + (1,) * grid.n)) / radius
    rho2 = np.sum(u**2, axis=0)
    bump = np.zeros(grid.shape)
    inside = rho2 < 1
    bump[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))

    order = int(math.floor(grid.n * (1 / p - 1) + 1e-12)) if radius <= 1 else -1
    poly = np.zeros(grid.shape)
    for alpha in _multi_indices(grid.n, max(order, 0) + 2):
        mono = np.prod([u[i] ** a for i, a in enumerate(alpha)], axis=0)
        poly += rng.standard_normal() * mono
    values = bump * poly

    if order >= 0:
        monos = [np.prod([u[i] ** a for i, a in enumerate(al)], axis=0)
                 for al in _multi_indices(grid.n, order)]
        gram = np.array([[np.sum(mi * mk * bump) for mk in monos] for mi in monos])
        rhs = np.array([np.sum(mi * values) for mi in monos])
        coef = np.linalg.solve(gram, rhs)
        values = values - bump * sum(c * m for c, m in zip(coef, monos))
        # one refinement sweep removes the residual left by the solve
        rhs = np.array([np.sum(mi * values) for mi in monos])
        coef = np.linalg.solve(gram, rhs)
        values = values - bump * sum(c * m for c, m in zip(coef, monos))

    vol = math.pi ** (grid.n / 2) / math.gamma(grid.n / 2 + 1) * radius**grid.n
    peak = np.max(np.abs(values))
    values = values * (vol ** (-1.0 / p) / peak)
    return Atom(center, radius, p, GridFunction(grid, values))
