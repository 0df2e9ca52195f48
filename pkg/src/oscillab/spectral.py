"""Periodic spectral grids, discrete Fourier transforms and L^p quadrature.

Conventions
-----------
Spatial nodes are ``x_i = -L/2 + i L/N`` and frequency nodes are
``xi_m = 2 pi m / L`` for ``m = -N/2 .. N/2-1`` (stored in ascending order,
i.e. zero frequency at index ``N/2``).  The forward transform carries the
weight ``dx`` and the inverse carries ``dxi / (2 pi)^n``, so that::

    fhat(xi) = sum_x f(x) exp(-i x.xi) dx
    f(x)     = sum_xi fhat(xi) exp(i x.xi) dxi / (2 pi)^n

With these weights a plane wave ``exp(i xi_m x)`` transforms to ``L^n`` at
``xi_m`` and zero elsewhere.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "NonFiniteError",
    "forward_transform",
    "inverse_transform",
    "lp_norm",
    "frequency_multiplier",
    "save_grid_function",
    "load_grid_function",
    "export_profile_csv",
]


class NonFiniteError(ValueError):
    """Raised when a numerical input or intermediate contains NaN/inf."""


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NonFiniteError(f"{what}: {bad} non-finite value(s)")


@dataclass(frozen=True)
class Grid:
    """Periodic box ``[-L/2, L/2)^n`` sampled with ``N`` points per axis."""

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dxi(self) -> float:
        return 2 * np.pi / self.L

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def xi_max(self) -> float:
        """Largest |frequency| representable along an axis (the Nyquist node)."""
        return np.pi * self.N / self.L

    @cached_property
    def x1d(self) -> np.ndarray:
        return -self.L / 2 + self.dx * np.arange(self.N)

    @cached_property
    def xi1d(self) -> np.ndarray:
        return self.dxi * np.arange(-self.N // 2, self.N // 2)

    @cached_property
    def x_nodes(self) -> np.ndarray:
        """Spatial nodes, shape ``(n, N, ..., N)``."""
        return np.stack(np.meshgrid(*([self.x1d] * self.n), indexing="ij"))

    @cached_property
    def xi_nodes(self) -> np.ndarray:
        """Frequency nodes, shape ``(n, N, ..., N)``."""
        return np.stack(np.meshgrid(*([self.xi1d] * self.n), indexing="ij"))

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi_nodes**2, axis=0))

    @cached_property
    def _sign(self) -> np.ndarray:
        # (-1)^(m_1 + ... + m_n): the phase of exp(-i x_0 . xi_m) with x_0 = -L/2
        s1 = (-1.0) ** np.arange(-self.N // 2, self.N // 2)
        out = s1
        for _ in range(self.n - 1):
            out = np.multiply.outer(out, s1)
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N}


@dataclass
class GridFunction:
    """Complex samples on a :class:`Grid`, either spatial or spectral."""

    grid: Grid
    values: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"expected {self.grid.shape} samples, got {self.values.shape}")

    @classmethod
    def from_callable(cls, grid: Grid, func: Callable) -> "GridFunction":
        """Sample ``func(*x_components)`` at the spatial nodes."""
        return cls(grid, func(*grid.x_nodes))

    @classmethod
    def from_spectrum(cls, grid: Grid, func: Callable) -> "GridFunction":
        """Sample ``func(*xi_components)`` at the frequency nodes."""
        return cls(grid, func(*grid.xi_nodes), spectral=True)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.spectral)

    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            if other.grid != self.grid or other.spectral != self.spectral:
                raise ValueError("grid function operands are incompatible")
            other = other.values
        return GridFunction(self.grid, op(self.values, other), self.spectral)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values, self.spectral)


ArrayOrFunc = Union[np.ndarray, Callable, float, complex]


def _fft_forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(-grid.n, 0))
    out = np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)
    return out * grid._sign * grid.dx**grid.n


def _fft_inverse(values: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(-grid.n, 0))
    shifted = np.fft.ifftshift(values * grid._sign, axes=axes)
    # ifftn divides by N^n; dx^n dxi^n N^n / (2pi)^n = 1
    return np.fft.ifftn(shifted, axes=axes) / grid.dx**grid.n


def forward_transform(f: GridFunction) -> GridFunction:
    """Trapezoidal approximation of ``fhat(xi) = int f(x) exp(-i x.xi) dx``."""
    if f.spectral:
        raise ValueError("forward_transform expects a spatial grid function")
    _check_finite(f.values, "forward_transform input")
    return GridFunction(f.grid, _fft_forward(f.values, f.grid), spectral=True)


def inverse_transform(F: GridFunction) -> GridFunction:
    """Inverse of :func:`forward_transform` (weight ``dxi/(2 pi)^n``)."""
    if not F.spectral:
        raise ValueError("inverse_transform expects a spectral grid function")
    _check_finite(F.values, "inverse_transform input")
    return GridFunction(F.grid, _fft_inverse(F.values, F.grid))


def lp_norm(f: GridFunction, p: float) -> float:
    """Riemann-sum L^p (quasi-)norm on the spatial lattice; ``p=inf`` is the max."""
    if f.spectral:
        raise ValueError("lp_norm expects a spatial grid function")
    return _lp(f.values, p, f.grid.dx**f.grid.n)


def _lp(values: np.ndarray, p: float, weight: float, axes=None):
    """L^p sum over ``axes`` (all axes when None); batch-friendly."""
    if not p > 0:
        raise ValueError(f"exponent p must be positive, got {p}")
    a = np.abs(values)
    if np.isinf(p):
        out = np.max(a, axis=axes)
        return float(out) if np.ndim(out) == 0 else out
    # normalise by the max so a**p neither under- nor overflows
    scale = np.max(a, axis=axes, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    s = np.sum((a / scale) ** p, axis=axes) * weight
    out = np.squeeze(scale, axis=axes) * s ** (1.0 / p)
    return float(out) if np.ndim(out) == 0 else out


def _symbol_values(grid: Grid, m: ArrayOrFunc) -> np.ndarray:
    if callable(m):
        vals = np.asarray(m(*grid.xi_nodes), dtype=complex)
    else:
        vals = np.asarray(m, dtype=complex)
    vals = np.broadcast_to(vals, grid.shape)
    _check_finite(vals, "multiplier symbol")
    return vals


def frequency_multiplier(f: GridFunction, m: ArrayOrFunc) -> GridFunction:
    """Apply the Fourier multiplier ``m(D)``.

    ``m`` is either an array sampled on the frequency lattice, a scalar, or a
    callable ``m(xi_1, ..., xi_n)`` evaluated at the frequency nodes.
    """
    if f.spectral:
        raise ValueError("frequency_multiplier expects a spatial grid function")
    sym = _symbol_values(f.grid, m)
    fh = forward_transform(f)
    return inverse_transform(GridFunction(f.grid, fh.values * sym, spectral=True))


def save_grid_function(f: GridFunction, path) -> None:
    """Write ``path`` (little-endian float64 re/im pairs, row-major) and ``path.json``."""
    path = Path(path)
    data = np.empty(f.values.shape + (2,), dtype="<f8")
    data[..., 0] = f.values.real
    data[..., 1] = f.values.imag
    path.write_bytes(data.tobytes(order="C"))
    meta = dict(f.grid.to_dict(), flag="spectral" if f.spectral else "spatial")
    Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True))


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    grid = Grid(int(meta["n"]), float(meta["L"]), int(meta["N"]))
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(grid.shape + (2,))
    values = raw[..., 0] + 1j * raw[..., 1]
    if meta["flag"] not in ("spatial", "spectral"):
        raise ValueError(f"unknown flag {meta['flag']!r}")
    return GridFunction(grid, values, spectral=meta["flag"] == "spectral")


def export_profile_csv(f: GridFunction, path) -> None:
    """CSV of ``|f|`` against the node coordinates (1D: x,|f|; 2D: x1,x2,|f|)."""
    nodes = f.grid.xi_nodes if f.spectral else f.grid.x_nodes
    cols = [c.ravel() for c in nodes] + [np.abs(f.values).ravel()]
    names = (["xi"] if f.spectral else ["x"])
    header = ",".join(
        [f"{names[0]}{i + 1}" if f.grid.n > 1 else names[0] for i in range(f.grid.n)]
        + ["abs"])
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
               comments="", fmt="%.17g")
