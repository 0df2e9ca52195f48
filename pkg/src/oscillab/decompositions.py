"""Littlewood-Paley partitions, unit-ball coverings of dyadic annuli and
directional partitions of the frequency space."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .spectral import Grid, GridFunction, frequency_multiplier

__all__ = [
    "smooth_step",
    "psi0_profile",
    "psi0",
    "psi_j",
    "LPBasis",
    "build_lp_basis",
    "lp_piece",
    "SecondDecomposition",
    "second_decomposition",
    "DirectionalPartition",
    "directional_partition",
    "export_basis_csv",
]


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t, a: float = 0.0, b: float = 1.0):
    """C^infinity ramp: 0 for t <= a, 1 for t >= b."""
    s = (np.asarray(t, dtype=float) - a) / (b - a)
    num = _h(s)
    return num / (num + _h(1.0 - s))


def psi0_profile(r):
    """Radial profile of psi_0: 1 on [0, 1], 0 on [2, inf), smooth in between."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1.0, 1.0, 1.0 - smooth_step(r, 1.0, 2.0))


def psi0(xi_abs):
    """psi_0 as a function of ``|xi|``."""
    return psi0_profile(xi_abs)


def psi_j(j: int, xi_abs):
    """The j-th Littlewood-Paley function as a function of ``|xi|``."""
    xi_abs = np.asarray(xi_abs, dtype=float)
    if j == 0:
        return psi0_profile(xi_abs)
    return psi0_profile(xi_abs / 2.0**j) - psi0_profile(xi_abs / 2.0 ** (j - 1))


def Psi_j(j: int, xi_abs):
    """``psi_{j+1} + psi_j + psi_{j-1}``; equals 1 on supp psi_j.

    For j = 0 the lower neighbour is dropped (``Psi_0 = psi_0 + psi_1``), which
    keeps ``Psi_0 = 1`` on ``supp psi_0``.
    """
    out = psi_j(j + 1, xi_abs) + psi_j(j, xi_abs)
    return out + psi_j(j - 1, xi_abs) if j >= 1 else out


@dataclass(frozen=True)
class LPBasis:
    """Littlewood-Paley functions sampled on a grid's frequency lattice."""

    grid: Grid
    j_max: int
    psi: tuple = field(repr=False)
    Psi: tuple = field(repr=False)

    def __call__(self, j: int) -> np.ndarray:
        return self.psi[j]

    def tail(self) -> np.ndarray:
        """``1 - sum_{j <= j_max} psi_j``, the part of the lattice not covered."""
        return 1.0 - psi0_profile(self.grid.xi_abs / 2.0**self.j_max)


def max_band(grid: Grid) -> int:
    """Largest j with 2^(j+1) <= the lattice's Nyquist frequency."""
    return int(np.floor(np.log2(grid.xi_max))) - 1


def build_lp_basis(j_max: int, grid: Grid) -> LPBasis:
    if j_max < 0:
        raise ValueError("j_max must be non-negative")
    if 2.0 ** (j_max + 1) > grid.xi_max:
        raise ValueError(
            f"j_max={j_max} needs |xi| up to {2 ** (j_max + 1)}, "
            f"grid resolves only {grid.xi_max:.6g}")
    r = grid.xi_abs
    psi = tuple(psi_j(j, r) for j in range(j_max + 1))
    # Psi_{j_max} needs psi_{j_max+1}, which may extend past the lattice; it
    # is still well defined as a function, only its support is truncated.
    Psi = tuple(Psi_j(j, r) for j in range(j_max + 1))
    for arr in psi + Psi:
        arr.setflags(write=False)
    return LPBasis(grid, j_max, psi, Psi)


def lp_piece(f: GridFunction, j: int, basis: LPBasis) -> GridFunction:
    """``psi_j(D) f``."""
    if f.grid != basis.grid:
        raise ValueError("function and basis live on different grids")
    if not 0 <= j <= basis.j_max:
        raise ValueError(f"band {j} outside basis range 0..{basis.j_max}")
    return frequency_multiplier(f, basis.psi[j])


@dataclass(frozen=True)
class SecondDecomposition:
    """Covering of supp psi_j by unit balls centred on the integer lattice.

    ``chi(nu)`` returns the normalised bump ``lambda_nu / sum_mu lambda_mu``
    sampled on the frequency lattice (zero where no bump is active).
    """

    j: int
    grid: Grid
    centers: np.ndarray  # (count, n)

    @cached_property
    def _denominator(self) -> np.ndarray:
        den = np.zeros(self.grid.shape)
        for nu in range(len(self.centers)):
            den += self._bump(nu)
        return den

    def _bump(self, nu: int) -> np.ndarray:
        c = self.centers[nu].reshape((-1,) + (1,) * self.grid.n)
        d = np.sqrt(np.sum((self.grid.xi_nodes - c) ** 2, axis=0))
        return psi0_profile(d)

    def chi(self, nu: int) -> np.ndarray:
        den = self._denominator
        out = np.zeros(self.grid.shape)
        on = den > 0
        out[on] = self._bump(nu)[on] / den[on]
        return out

    def chi_sum(self) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        for nu in range(self.count):
            out += self.chi(nu)
        return out

    @property
    def count(self) -> int:
        return len(self.centers)


def second_decomposition(j: int, grid: Grid) -> SecondDecomposition:
    if j < 1:
        raise ValueError("the unit-ball covering is defined for bands j >= 1")
    outer = 2.0 ** (j + 1) + 1
    if outer + 1 > grid.xi_max:
        raise ValueError(f"annulus of band {j} does not fit in the lattice")
    inner = 2.0 ** (j - 1) - 1
    k = np.arange(-int(np.ceil(outer)), int(np.ceil(outer)) + 1)
    pts = np.stack(np.meshgrid(*([k] * grid.n), indexing="ij"), -1).reshape(-1, grid.n)
    r = np.sqrt(np.sum(pts.astype(float) ** 2, axis=1))
    centers = pts[(r >= inner) & (r <= outer)].astype(float)
    return SecondDecomposition(j, grid, centers)


@dataclass(frozen=True)
class DirectionalPartition:
    """Functions lambda_l, l = 1..2n, attached to the directions +-e_i.

    The ordering is ``+e_1, -e_1, +e_2, -e_2``.
    """

    R: float
    grid: Grid
    lam: tuple = field(repr=False)

    def __call__(self, ell: int) -> np.ndarray:
        return self.lam[ell - 1]


def _axis_cutoffs(xi: np.ndarray, R: float, n: int) -> list:
    upper = R / np.sqrt(n)
    lower = min(1.0, upper / 2)
    out = []
    for i in range(n):
        out.append(smooth_step(xi[i], lower, upper))
        out.append(smooth_step(-xi[i], lower, upper))
    return out


def directional_weights(xi: np.ndarray, R: float) -> list:
    """Evaluate all lambda_l at points ``xi`` of shape (n, ...)."""
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[0]
    chis = _axis_cutoffs(xi, R, n)
    total = sum(chis)
    safe = np.where(total > 0, total, 1.0)
    return [np.where(total > 0, c / safe, 0.0) for c in chis]


def directional_partition(R: float, grid: Grid) -> DirectionalPartition:
    if not R > 1:
        raise ValueError(f"inner radius must exceed 1, got {R}")
    lam = tuple(directional_weights(grid.xi_nodes, R))
    return DirectionalPartition(R, grid, lam)


def export_basis_csv(basis: LPBasis, path) -> None:
    """One row per lattice node: |xi| (1D: xi) followed by psi_0..psi_jmax."""
    g = basis.grid
    coords = [c.ravel() for c in g.xi_nodes]
    cols = coords + [p.ravel() for p in basis.psi]
    names = ([f"xi{i + 1}" for i in range(g.n)] if g.n > 1 else ["xi"]) + \
        [f"psi_{j}" for j in range(basis.j_max + 1)]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")
