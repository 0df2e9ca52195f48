"""Phase functions, amplitudes and checks of the phase/amplitude class conditions.

Phases and amplitudes are either built from sympy expressions (presets and
the small expression grammar), in which case every mixed derivative is
generated in closed form, or wrap plain numpy callables, in which case
derivatives come from nested central differences.

Array conventions: ``x`` and ``xi`` have shape ``(n, ...)``; evaluators
broadcast over the trailing axes.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Optional

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .decompositions import psi0_profile

__all__ = [
    "PhaseFunction",
    "Amplitude",
    "SampleSet",
    "CheckResult",
    "PhaseReport",
    "critical_order",
    "default_samples",
    "check_snd",
    "check_fk",
    "check_l2_condition",
    "check_lf",
    "check_schrodinger_phase",
    "check_amplitude_class",
    "verify_phase",
    "phase_preset",
    "amplitude_preset",
    "parse_expression",
    "make_phase",
    "make_amplitude",
    "phase_from_config",
    "amplitude_from_config",
    "PHASE_PRESETS",
    "AMPLITUDE_PRESETS",
]

MAX_ORDER = 4


def critical_order(k: float, n: int, p: float) -> float:
    """``m_k(p) = -k n |1/p - 1/2|`` with ``1/inf = 0``."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    inv = 0.0 if math.isinf(p) else 1.0 / p
    return -k * n * abs(inv - 0.5)


# -- psi_0 as a sympy function ---------------------------------------------

class Psi0(sp.Function):
    """Radial cut-off profile psi_0(r); derivatives map to :class:`Psi0Deriv`."""

    nargs = 1

    def fdiff(self, argindex=1):
        return Psi0Deriv(self.args[0], 1)


class Psi0Deriv(sp.Function):
    """``d^k/dr^k psi_0(r)``, second argument is the order k."""

    nargs = 2

    def fdiff(self, argindex=1):
        if argindex != 1:
            raise sp.ArgumentIndexError(self, argindex)
        return Psi0Deriv(self.args[0], self.args[1] + 1)


@lru_cache(maxsize=None)
def _ramp_derivative(order: int) -> Callable:
    # psi_0(r) = 1 - g(r - 1) on (1, 2), where the ramp h(s)/(h(s) + h(1-s))
    # equals (1 - tanh(u/2))/2 with u = 1/s - 1/(1-s); tanh saturates cleanly
    s = sp.Symbol("s")
    g = (1 - sp.tanh((1 / s - 1 / (1 - s)) / 2)) / 2
    return sp.lambdify(s, sp.diff(g, s, order), "numpy")


def _psi0_deriv_numeric(r, k):
    r = np.asarray(r, dtype=float)
    k = int(np.asarray(k).flat[0])
    s = r - 1.0
    inside = (s > 1e-3) & (s < 1 - 1e-3)
    out = np.zeros(np.broadcast(r, r).shape)
    if np.any(inside):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            vals = np.broadcast_to(_ramp_derivative(k)(s[inside]), s[inside].shape)
        out[inside] = -np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)
    return out


_NUMERIC = [{"Psi0": psi0_profile, "Psi0Deriv": _psi0_deriv_numeric}, "numpy"]


# -- symbolic variables ----------------------------------------------------

@lru_cache(maxsize=None)
def variables(n: int):
    if n == 1:
        return (sp.Symbol("x"),), (sp.Symbol("xi"),)
    xs = tuple(sp.Symbol(f"x{i + 1}") for i in range(n))
    xis = tuple(sp.Symbol(f"xi{i + 1}") for i in range(n))
    return xs, xis


def _xi_norm2(n):
    return sum(v**2 for v in variables(n)[1])


def _abs_xi(n):
    return sp.sqrt(_xi_norm2(n))


def _jap_xi(n):
    return sp.sqrt(1 + _xi_norm2(n))


def _dot(n):
    xs, xis = variables(n)
    return sum(a * b for a, b in zip(xs, xis))


def _pow_abs_xi(n, k):
    """|xi|^k written as (xi.xi)^(k/2), which sympy differentiates without Abs."""
    return _xi_norm2(n) ** (sp.nsimplify(k) / 2)


# -- evaluators ------------------------------------------------------------

def _multi_indices(n: int, order: int):
    return [a for a in product(range(order + 1), repeat=n) if sum(a) == order]


def derivative_orders(n: int, max_order: int = MAX_ORDER, min_xi=0, min_x=0, min_total=0):
    """All pairs (alpha, beta) with the given lower bounds and |alpha+beta| <= max_order."""
    out = []
    for tot in range(max_order + 1):
        for ta in range(tot + 1):
            tb = tot - ta
            if ta < min_xi or tb < min_x or tot < min_total:
                continue
            for a in _multi_indices(n, ta):
                for b in _multi_indices(n, tb):
                    out.append((a, b))
    return out


class _Evaluable:
    """Shared machinery for phases and amplitudes."""

    def __init__(self, n: int, expr=None, func: Optional[Callable] = None, *,
                 name: str = "custom", fd_step: float = 2.0**-10):
        if (expr is None) == (func is None):
            raise ValueError("give exactly one of expr or func")
        self.n = n
        self.expr = expr
        self.func = func
        self.name = name
        self.fd_step = fd_step
        self._cache = {}

    @property
    def symbolic(self) -> bool:
        return self.expr is not None

    def _compiled(self, alpha, beta):
        key = (tuple(alpha), tuple(beta))
        if key not in self._cache:
            xs, xis = variables(self.n)
            e = self.expr
            for v, a in zip(xis, alpha):
                if a:
                    e = sp.diff(e, v, a)
            for v, b in zip(xs, beta):
                if b:
                    e = sp.diff(e, v, b)
            self._cache[key] = sp.lambdify(xs + xis, e, modules=_NUMERIC)
        return self._cache[key]

    def __call__(self, x, xi):
        return self.derivative(x, xi, (0,) * self.n, (0,) * self.n)

    def derivative(self, x, xi, alpha=None, beta=None):
        """``d^alpha_xi d^beta_x`` of the function at (x, xi)."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        shape = np.broadcast_shapes(x.shape[1:], xi.shape[1:])
        return np.broadcast_to(self.compact(x, xi, alpha, beta), shape)

    def compact(self, x, xi, alpha=None, beta=None) -> np.ndarray:
        """Like :meth:`derivative` but without broadcasting the result, so
        factors depending on x (or xi) alone stay small."""
        alpha = tuple(alpha) if alpha is not None else (0,) * self.n
        beta = tuple(beta) if beta is not None else (0,) * self.n
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.symbolic:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return np.asarray(self._compiled(alpha, beta)(*x, *xi))
        return np.asarray(self.fd_derivative(x, xi, alpha, beta))

    def fd_derivative(self, x, xi, alpha, beta, h: float | None = None):
        """Nested central differences; available for symbolic objects too."""
        h = self.fd_step if h is None else h
        base = self.func if self.func is not None else (
            lambda xx, kk: self._compiled((0,) * self.n, (0,) * self.n)(*xx, *kk))
        steps = [("xi", i) for i, a in enumerate(alpha) for _ in range(a)] + \
                [("x", i) for i, b in enumerate(beta) for _ in range(b)]

        def rec(xx, kk, todo):
            if not todo:
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    return np.asarray(base(xx, kk))
            var, i = todo[0]
            e = np.zeros((self.n,) + (1,) * (xx.ndim - 1))
            e[i] = h
            if var == "x":
                return (rec(xx + e, kk, todo[1:]) - rec(xx - e, kk, todo[1:])) / (2 * h)
            return (rec(xx, kk + e, todo[1:]) - rec(xx, kk - e, todo[1:])) / (2 * h)

        return rec(np.asarray(x, dtype=float), np.asarray(xi, dtype=float), steps)

    def depends_on_x(self) -> bool:
        if not self.symbolic:
            return True
        xs, _ = variables(self.n)
        return bool(self._x_part().free_symbols & set(xs))

    def _x_part(self):
        return self.expr


class PhaseFunction(_Evaluable):
    """Real phase phi(x, xi) with class metadata.

    Metadata: ``k`` (F^k order), ``mu`` (LF order), ``smooth_at_origin``,
    ``snd_delta`` (claimed lower bound of |det d_x d_xi phi|) and
    ``schrodinger`` (claims bounded derivatives of order >= 2).
    """

    def __init__(self, n, expr=None, func=None, *, name="custom", k=None, mu=None,
                 smooth_at_origin=True, snd_delta=None, l2=None, schrodinger=None,
                 fd_step=2.0**-10):
        super().__init__(n, expr, func, name=name, fd_step=fd_step)
        self.k = k
        self.mu = mu
        self.smooth_at_origin = smooth_at_origin
        self.snd_delta = snd_delta
        self.l2 = l2
        self.schrodinger = schrodinger

    def _x_part(self):
        return sp.expand(self.expr - _dot(self.n))

    @property
    def is_multiplier(self) -> bool:
        """True when phi(x, xi) - x.xi does not depend on x."""
        return self.symbolic and not self.depends_on_x()

    def dispersion(self, xi):
        """``phi(0, xi)``; for multiplier-type phases phi = x.xi + dispersion(xi)."""
        xi = np.asarray(xi, dtype=float)
        return self(np.zeros((self.n,) + (1,) * (xi.ndim - 1)), xi)

    def metadata(self) -> dict:
        return {"name": self.name, "n": self.n, "k": self.k, "mu": self.mu,
                "smooth_at_origin": self.smooth_at_origin,
                "snd_delta": self.snd_delta, "l2": self.l2,
                "schrodinger": self.schrodinger}


class Amplitude(_Evaluable):
    """Amplitude a(x, xi) with claimed class S^m_{rho, delta}."""

    def __init__(self, n, expr=None, func=None, *, name="custom", m=0.0, rho=1.0,
                 delta=0.0, fd_step=2.0**-10):
        super().__init__(n, expr, func, name=name, fd_step=fd_step)
        self.m = m
        self.rho = rho
        self.delta = delta

    @property
    def is_multiplier(self) -> bool:
        return self.symbolic and not self.depends_on_x()

    def symbol(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self(np.zeros((self.n,) + (1,) * (xi.ndim - 1)), xi)

    def metadata(self) -> dict:
        return {"name": self.name, "n": self.n, "m": self.m, "rho": self.rho,
                "delta": self.delta}


# -- expression grammar ----------------------------------------------------

_FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt}
_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z_0-9]*)|(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(\*\*|[-+*/^(),]))")


def parse_expression(text: str, n: int = 1):
    """Parse an arithmetic expression over x, xi (1D) or x1.., xi1.. (2D).

    Besides + - * / ^ and parentheses the grammar knows ``abs(xi)`` (= |xi|),
    ``jap(xi)`` (= <xi>), ``dot(x,xi)``, ``sin``, ``cos``, ``exp``, ``sqrt``,
    ``pi`` and ``I``.  Anything else is rejected.
    """
    src = re.sub(r"abs\(\s*xi\s*\)", " _absxi ", text)
    src = re.sub(r"jap\(\s*xi\s*\)", " _japxi ", src)
    src = re.sub(r"dot\(\s*x\s*,\s*xi\s*\)", " _dot ", src)
    xs, xis = variables(n)
    names = {str(v): v for v in xs + xis}
    names.update(_absxi=_abs_xi(n), _japxi=_jap_xi(n), _dot=_dot(n), pi=sp.pi, I=sp.I)
    names.update(_FUNCS)
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            if src[pos:].strip() == "":
                break
            raise ValueError(f"unexpected character {src[pos]!r} in {text!r}")
        ident = m.group(1)
        if ident is not None and ident not in names:
            raise ValueError(f"unknown name {ident!r} in {text!r}")
        pos = m.end()
    src = src.replace("^", "**")
    glb = {"Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational,
           "Symbol": sp.Symbol, "__builtins__": {}}
    return parse_expr(src, local_dict=names, global_dict=glb,
                      transformations=standard_transformations)


# -- presets ---------------------------------------------------------------

def _t_profile(n):
    xs, _ = variables(n)
    return sum(sp.sin(v) for v in xs) / n


def _num(text):
    text = text.strip()
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def _args(spec: str):
    name, _, rest = spec.partition(":")
    vals = [_num(t) for t in rest.split(",") if t.strip()] if rest else []
    return name.strip().lower(), vals


def phase_preset(spec: str, n: int = 1) -> PhaseFunction:
    """Build a catalogued phase from ``"name:args"``.

    ``linear``, ``power:k``, ``schrodinger``, ``wave``, ``waterwave``,
    ``capillary``, ``kgdisp`` (x.xi + <xi>), ``kg:eps``, ``tk:eps,k``,
    ``ho:t``, ``fujiwara1d:k``, ``sio1d``.  A trailing ``@t`` scales the
    non-linear part by a time, e.g. ``power:2@0.5`` is x.xi + 0.5|xi|^2.
    """
    spec, _, tpart = spec.partition("@")
    tscale = sp.nsimplify(_num(tpart)) if tpart else sp.Integer(1)
    name, a = _args(spec)
    dot = _dot(n)
    xs, xis = variables(n)

    def finish(extra, **meta):
        expr = dot + tscale * extra
        label = spec + (f"@{tpart}" if tpart else "")
        return PhaseFunction(n, expr, name=label, **meta)

    if name == "linear":
        return PhaseFunction(n, dot, name="linear", k=1.0, mu=1.0, smooth_at_origin=True,
                             snd_delta=1.0, l2=True, schrodinger=True)
    if name in ("power", "schrodinger", "wave", "waterwave", "capillary"):
        k = {"schrodinger": 2.0, "wave": 1.0, "waterwave": 0.5, "capillary": 1.5}.get(name)
        k = a[0] if k is None else k
        smooth = float(k).is_integer() and int(k) % 2 == 0
        return finish(_pow_abs_xi(n, k), k=k, mu=min(1.0, k), smooth_at_origin=smooth,
                      snd_delta=1.0, l2=True, schrodinger=(k == 2.0))
    if name == "kgdisp":
        return finish(_jap_xi(n), k=1.0, mu=None, smooth_at_origin=True, snd_delta=1.0,
                      l2=True, schrodinger=True)
    if name == "kg":
        eps = a[0] if a else 0.1
        return finish(sp.nsimplify(eps) * _t_profile(n) * _jap_xi(n), k=1.0, mu=None,
                      smooth_at_origin=True, snd_delta=1 - eps, l2=True,
                      schrodinger=False)
    if name == "tk":
        eps, k = (a + [0.1, 0.5][len(a):])[:2]
        extra = sp.nsimplify(eps) * _t_profile(n) * _pow_abs_xi(n, k)
        return finish(extra, k=k, mu=min(1.0, k), smooth_at_origin=False,
                      snd_delta=1 - eps * k if k <= 1 else None, l2=k <= 1,
                      schrodinger=False)
    if name == "ho":
        t = a[0] if a else 0.3
        if abs(2 * t) > math.pi / 2 - 0.2:
            raise ValueError(f"harmonic-oscillator time {t} outside |2t| <= pi/2 - 0.2")
        c, tn = sp.sec(2 * sp.nsimplify(t)), sp.tan(2 * sp.nsimplify(t))
        expr = sum(c * u * v - tn / 2 * (u**2 + v**2) for u, v in zip(xs, xis))
        return PhaseFunction(n, expr, name=f"ho:{t}", k=None, mu=None,
                             smooth_at_origin=True, snd_delta=1.0, l2=True,
                             schrodinger=True)
    if name == "fujiwara1d":
        if n != 1:
            raise ValueError("fujiwara1d is one-dimensional")
        k = a[0] if a else 2.0
        x, xi = xs[0], xis[0]
        extra = -sp.sin(x) * sp.cos(xi) / 2 + _pow_abs_xi(1, k)
        smooth = float(k).is_integer() and int(k) % 2 == 0
        return finish(extra, k=k, mu=None, smooth_at_origin=smooth,
                      snd_delta=0.5, l2=True, schrodinger=(k == 2.0))
    if name == "sio1d":
        if n != 1:
            raise ValueError("sio1d is one-dimensional")
        x, xi = xs[0], xis[0]
        expr = sp.sin(x) * sp.sin(xi) + xi**2 + (2 * xi + 1) * x
        return PhaseFunction(1, expr, name="sio1d", k=None, mu=None, smooth_at_origin=True,
                             snd_delta=1.0, l2=True, schrodinger=True)
    raise ValueError(f"unknown phase preset {spec!r}")


def make_phase(text: str, n: int = 1, **meta) -> PhaseFunction:
    """Preset name (``"power:2"``) or grammar expression (``"x*xi + abs(xi)^3"``)."""
    name = text.split(":")[0].split("@")[0].strip().lower()
    if name in _PHASE_NAMES:
        return phase_preset(text, n)
    return PhaseFunction(n, parse_expression(text, n), name=text, **meta)


def make_amplitude(text: str, n: int = 1, **meta) -> Amplitude:
    name = text.split(":")[0].strip().lower()
    if name in _AMP_NAMES:
        return amplitude_preset(text, n)
    return Amplitude(n, parse_expression(text, n), name=text, **meta)


def phase_from_config(cfg, n: int = 1) -> PhaseFunction:
    """``cfg`` is a string or a dict ``{"expr" | "preset": ..., k, mu, ...}``."""
    if isinstance(cfg, str):
        return make_phase(cfg, n)
    cfg = dict(cfg)
    text = cfg.pop("preset", None) or cfg.pop("expr")
    return make_phase(text, n, **cfg)


def amplitude_from_config(cfg, n: int = 1) -> Amplitude:
    if isinstance(cfg, str):
        return make_amplitude(cfg, n)
    cfg = dict(cfg)
    text = cfg.pop("preset", None) or cfg.pop("expr")
    return make_amplitude(text, n, **cfg)


PHASE_PRESETS = ("linear", "power:k", "schrodinger", "wave", "waterwave", "capillary",
                 "kgdisp", "kg:eps", "tk:eps,k", "ho:t", "fujiwara1d:k", "sio1d")


def amplitude_preset(spec: str, n: int = 1) -> Amplitude:
    """``one``, ``bessel:m`` (<xi>^m), ``hom:m`` ((1-psi_0)|xi|^m),
    ``miyachi:k,m`` (exp(i|xi|^k)(1-psi_0)|xi|^m), ``cosx:c`` (1 + c cos x_1),
    ``sio:c`` (exp(i c sin x_1 cos xi_1), in S^0_{0,0}), ``ho:t``, ``band:j``
    (psi_j(xi))."""
    name, a = _args(spec)
    xs, xis = variables(n)
    r = _abs_xi(n)
    if name == "one":
        return Amplitude(n, sp.Integer(1), name="one", m=0.0, rho=1.0, delta=0.0)
    if name == "bessel":
        m = a[0]
        return Amplitude(n, _jap_xi(n) ** sp.nsimplify(m), name=spec, m=m, rho=1.0, delta=0.0)
    if name == "hom":
        m = a[0]
        expr = (1 - Psi0(r)) * _pow_abs_xi(n, m)
        return Amplitude(n, expr, name=spec, m=m, rho=1.0, delta=0.0)
    if name == "miyachi":
        k, m = a[:2]
        expr = sp.exp(sp.I * _pow_abs_xi(n, k)) * (1 - Psi0(r)) * _pow_abs_xi(n, m)
        return Amplitude(n, expr, name=spec, m=m, rho=0.0, delta=0.0)
    if name == "cosx":
        c = a[0] if a else 0.5
        return Amplitude(n, 1 + sp.nsimplify(c) * sp.cos(xs[0]), name=spec, m=0.0,
                         rho=1.0, delta=0.0)
    if name == "sio":
        c = a[0] if a else 1.0
        expr = sp.exp(sp.I * sp.nsimplify(c) * sp.sin(xs[0]) * sp.cos(xis[0]))
        return Amplitude(n, expr, name=spec, m=0.0, rho=0.0, delta=0.0)
    if name == "ho":
        t = a[0] if a else 0.3
        return Amplitude(n, sp.cos(2 * sp.nsimplify(t)) ** sp.Rational(-n, 2), name=spec,
                         m=0.0, rho=1.0, delta=0.0)
    if name == "band":
        j = int(a[0])
        expr = Psi0(r) if j == 0 else Psi0(r / 2**j) - Psi0(r / 2 ** (j - 1))
        return Amplitude(n, expr, name=spec, m=0.0, rho=1.0, delta=0.0)
    raise ValueError(f"unknown amplitude preset {spec!r}")


AMPLITUDE_PRESETS = ("one", "bessel:m", "hom:m", "miyachi:k,m", "cosx:c", "sio:c",
                     "ho:t", "band:j")
_PHASE_NAMES = {p.split(":")[0] for p in PHASE_PRESETS}
_AMP_NAMES = {p.split(":")[0] for p in AMPLITUDE_PRESETS}


# -- sample sets -----------------------------------------------------------

@dataclass
class SampleSet:
    """Points (x, xi) with the dyadic shell index of |xi| and |x|.

    ``xi_level[s] = floor(log2 |xi_s|)``; ``x_level`` likewise (x = 0 gets a
    level below every other one).
    """

    x: np.ndarray
    xi: np.ndarray
    xi_level: np.ndarray
    x_level: np.ndarray
    description: str
    structured: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.structured is None:
            self.structured = np.ones(self.x.shape[1], dtype=bool)

    @property
    def size(self) -> int:
        return self.x.shape[1]

    @property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi**2, axis=0))

    def where(self, mask: np.ndarray, note: str = "") -> "SampleSet":
        desc = self.description + (f"; {note}" if note else "")
        return SampleSet(self.x[:, mask], self.xi[:, mask], self.xi_level[mask],
                         self.x_level[mask], desc, self.structured[mask])


def _radial_points(n: int, levels, offsets, directions: int, include_zero: bool):
    pts = [np.zeros(n)] if include_zero else []
    if n == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    else:
        ang = 2 * np.pi * (np.arange(directions) + 0.5) / directions
        dirs = [np.array([math.cos(t), math.sin(t)]) for t in ang]
    for lv in levels:
        for off in offsets:
            for d in dirs:
                pts.append(d * 2.0**lv * (1 + off))
    return np.array(pts).T


def default_samples(n: int = 1, *, xi_levels=(-6, 8), x_levels=(-2, 4),
                    n_random: int = 256, seed: int = 0) -> SampleSet:
    """Tensor set of x on dyadic rays up to 2^x_max and xi on dyadic shells,
    plus log-uniform random samples."""
    xi_pts = _radial_points(n, range(xi_levels[0], xi_levels[1] + 1),
                            (0.0, 0.25, 0.5, 0.75), 8, include_zero=False)
    x_pts = _radial_points(n, range(x_levels[0], x_levels[1] + 1),
                           tuple(np.arange(8) / 8), 4, include_zero=True)
    X = np.repeat(x_pts, xi_pts.shape[1], axis=1)
    XI = np.tile(xi_pts, (1, x_pts.shape[1]))
    n_tensor = X.shape[1]
    rng = np.random.default_rng(seed)
    if n_random:
        rad = 2.0 ** rng.uniform(xi_levels[0], xi_levels[1] + 1, n_random)
        direc = rng.standard_normal((n, n_random))
        direc /= np.linalg.norm(direc, axis=0)
        XI = np.concatenate([XI, direc * rad], axis=1)
        xr = 2.0 ** rng.uniform(x_levels[0], x_levels[1] + 1, n_random)
        xd = rng.standard_normal((n, n_random))
        xd /= np.linalg.norm(xd, axis=0)
        X = np.concatenate([X, xd * xr], axis=1)

    def level(v):
        a = np.sqrt(np.sum(v**2, axis=0))
        out = np.full(a.shape, -10**6, dtype=int)
        nz = a > 0
        out[nz] = np.floor(np.log2(a[nz]) + 1e-12).astype(int)
        return out

    desc = (f"n={n}; |xi| in dyadic shells 2^{xi_levels[0]}..2^{xi_levels[1]}; "
            f"|x| in 0 and shells 2^{x_levels[0]}..2^{x_levels[1]}; "
            f"{n_random} random (seed {seed})")
    structured = np.arange(X.shape[1]) < n_tensor
    return SampleSet(X, XI, level(XI), level(X), desc, structured)


# -- checks ----------------------------------------------------------------

@dataclass
class CheckResult:
    """Outcome of one class-condition check.

    ``constant`` is the measured sup (or min for SND); ``growth`` the fitted
    log2-slope of per-shell sups towards the unbounded end of the sample set.
    """

    condition: str
    verdict: bool
    constant: float
    threshold: float
    growth: dict = field(default_factory=dict)
    samples_used: int = 0
    skipped: int = 0
    max_order: int = MAX_ORDER

    def to_dict(self) -> dict:
        return {"condition": self.condition, "verdict": bool(self.verdict),
                "constant": _jsonable(self.constant), "threshold": _jsonable(self.threshold),
                "growth": {k: _jsonable(v) for k, v in self.growth.items()},
                "samples_used": self.samples_used, "skipped": self.skipped,
                "max_order": self.max_order}


def _jsonable(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


@dataclass
class PhaseReport:
    phase: dict
    samples: str
    checks: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return all(c.verdict for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"phase": self.phase, "samples": self.samples,
                "verdict": bool(self.verdict),
                "checks": {k: v.to_dict() for k, v in self.checks.items()},
                "note": f"derivatives checked up to total order {MAX_ORDER}"}


# absolute guard only; boundedness is judged mainly from the shell growth, since
# smooth cut-offs have large but finite high-order derivatives
DEFAULT_THRESHOLD = 1e6
GROWTH_TOL = 0.25
_TAIL = 4


def _tail_slope(levels: np.ndarray, values: np.ndarray, towards: int) -> float:
    """Slope of log2 of the running sup (shell by shell, moving in the given
    direction) over the outermost few shells.  The running sup of a bounded
    oscillating quantity saturates, an unbounded one keeps growing."""
    uniq = np.unique(levels[levels > -10**5])
    if towards < 0:
        uniq = uniq[::-1]
    if len(uniq) < 2:
        return 0.0
    peaks = np.maximum.accumulate([np.max(values[levels == u]) for u in uniq])[-_TAIL:]
    uniq = uniq[-_TAIL:]
    floor = 1e-12 * max(1.0, float(np.max(values)))
    if np.all(peaks <= floor):
        return 0.0
    peaks = np.maximum(peaks, floor)
    slope = np.polyfit(uniq.astype(float), np.log2(peaks), 1)[0]
    return float(slope * (1 if towards > 0 else -1))


def _sup_check(name, samples: SampleSet, ratio_fn, orders, threshold, directions):
    """Evaluate ratios for every derivative order, drop non-finite samples, and
    decide bounded-ness from both the sup and the shell growth."""
    per_sample = np.zeros(samples.size)
    bad = np.zeros(samples.size, dtype=bool)
    for alpha, beta in orders:
        r = np.abs(np.asarray(ratio_fn(alpha, beta), dtype=complex))
        r = np.broadcast_to(r, per_sample.shape)
        bad |= ~np.isfinite(r)
        per_sample = np.maximum(per_sample, np.where(np.isfinite(r), r, 0.0))
    good = ~bad
    vals = per_sample[good]
    const = float(vals.max()) if vals.size else math.nan
    # growth is read off the tensor part only: random points would mix shells
    fit = good & samples.structured
    growth = {}
    for key, (levels, towards) in directions.items():
        growth[key] = (_tail_slope(levels[fit], per_sample[fit], towards)
                       if fit.any() else math.nan)
    verdict = bool(vals.size) and const <= threshold and all(
        g <= GROWTH_TOL for g in growth.values())
    return CheckResult(name, verdict, const, threshold, growth, int(good.sum()), int(bad.sum()))


def _restrict(phi_or_a, samples: SampleSet, lo=None, hi=None) -> SampleSet:
    r = samples.xi_abs
    mask = np.ones(samples.size, dtype=bool)
    notes = []
    if lo is not None:
        mask &= r >= lo
        notes.append(f"|xi| >= {lo:g}")
    if hi is not None:
        mask &= r <= hi
        notes.append(f"|xi| <= {hi:g}")
    if not getattr(phi_or_a, "smooth_at_origin", True):
        mask &= r >= 2.0**-6
        notes.append("|xi| >= 2^-6 (phase singular at 0)")
    return samples.where(mask, ", ".join(notes))


def _directions(s: SampleSet, xi_towards=+1):
    return {"xi": (s.xi_level, xi_towards), "x": (s.x_level, +1)}


def _unit(n, i):
    e = [0] * n
    e[i] = 1
    return tuple(e)


def _minus_linear(d, s: SampleSet, alpha, beta):
    """Subtract the matching derivative of x.xi from ``d``."""
    a, b = sum(alpha), sum(beta)
    if a == 0 and b == 0:
        return d - np.sum(s.x * s.xi, axis=0)
    if a == 1 and b == 0:
        return d - s.x[alpha.index(1)]
    if a == 0 and b == 1:
        return d - s.xi[beta.index(1)]
    if a == 1 and b == 1 and alpha == beta:
        return d - 1.0
    return d


def check_snd(phi: PhaseFunction, samples: SampleSet, delta: float | None = None) -> CheckResult:
    """min |det(d_x d_xi phi)| over the samples (|xi| >= 1 for singular phases)."""
    delta = phi.snd_delta if delta is None else delta
    s = samples if phi.smooth_at_origin else _restrict(phi, samples, lo=1.0)
    n = phi.n
    mat = np.empty((s.size, n, n))
    for j in range(n):
        for k in range(n):
            mat[:, j, k] = np.real(phi.derivative(s.x, s.xi, _unit(n, k), _unit(n, j)))
    finite = np.all(np.isfinite(mat), axis=(1, 2))
    dets = np.abs(np.linalg.det(mat[finite])) if finite.any() else np.array([])
    const = float(dets.min()) if dets.size else math.nan
    thr = 0.0 if delta is None else float(delta)
    verdict = bool(dets.size) and (const > 0 if delta is None else const >= thr * (1 - 1e-12))
    return CheckResult("SND", verdict, const, thr, {}, int(finite.sum()), int((~finite).sum()), 2)


def check_fk(phi: PhaseFunction, k: float, samples: SampleSet,
             threshold: float = DEFAULT_THRESHOLD) -> CheckResult:
    """F^k condition at |xi| >= 1."""
    s = _restrict(phi, samples, lo=1.0)
    n = phi.n
    r = s.xi_abs
    def diff_part(alpha, beta):
        return _minus_linear(phi.derivative(s.x, s.xi, alpha, beta), s, alpha, beta)

    if k >= 1:
        orders = derivative_orders(n, min_xi=1, min_total=1)
        orders = [(a, b) for a, b in orders if sum(b) == 0]
        fn = lambda a, b: diff_part(a, b) / r ** (k - 1)
    else:
        orders = derivative_orders(n, min_total=1)
        fn = lambda a, b: diff_part(a, b) / r ** (k - sum(a))
    res = _sup_check(f"F^{k:g}", s, fn, orders, threshold, _directions(s))
    return res


def check_l2_condition(phi: PhaseFunction, samples: SampleSet,
                       threshold: float = DEFAULT_THRESHOLD) -> CheckResult:
    s = _restrict(phi, samples, lo=1.0)
    orders = derivative_orders(phi.n, min_xi=1, min_x=1)
    fn = lambda a, b: phi.derivative(s.x, s.xi, a, b)
    return _sup_check("L2", s, fn, orders, threshold, _directions(s))


def check_lf(phi: PhaseFunction, mu: float, samples: SampleSet,
             threshold: float = DEFAULT_THRESHOLD) -> CheckResult:
    """LF(mu): |d^a_xi d^b_x (phi - x.xi)| <= c |xi|^{mu - |a|} for 0 < |xi| <= 2."""
    s = samples.where((samples.xi_abs > 0) & (samples.xi_abs <= 2), "0 < |xi| <= 2")
    n = phi.n
    r = s.xi_abs

    def fn(alpha, beta):
        d = _minus_linear(phi.derivative(s.x, s.xi, alpha, beta), s, alpha, beta)
        return d / r ** (mu - sum(alpha))

    orders = derivative_orders(n)
    return _sup_check(f"LF({mu:g})", s, fn, orders, threshold, _directions(s, xi_towards=-1))


def check_schrodinger_phase(phi: PhaseFunction, samples: SampleSet,
                            threshold: float = DEFAULT_THRESHOLD) -> CheckResult:
    """sup |d^a_xi d^b_x phi| over |a + b| >= 2 on the whole sample set."""
    s = samples
    orders = derivative_orders(phi.n, min_total=2)
    fn = lambda a, b: phi.derivative(s.x, s.xi, a, b)
    dirs = _directions(s)
    dirs["xi->0"] = (s.xi_level, -1)
    return _sup_check("Schrodinger", s, fn, orders, threshold, dirs)


def check_amplitude_class(a: Amplitude, m: float, rho: float, delta: float,
                          samples: SampleSet, threshold: float = DEFAULT_THRESHOLD) -> CheckResult:
    """sup |d^al_xi d^be_x a| / <xi>^{m - rho|al| + delta|be|}."""
    s = samples
    jap = np.sqrt(1 + s.xi_abs**2)
    fn = lambda al, be: a.derivative(s.x, s.xi, al, be) / jap ** (m - rho * sum(al) + delta * sum(be))
    orders = derivative_orders(a.n)
    return _sup_check(f"S^{m:g}_{{{rho:g},{delta:g}}}", s, fn, orders, threshold, _directions(s))


def verify_phase(phi: PhaseFunction, samples: SampleSet | None = None, *, snd=True,
                 fk: float | None = None, l2=False, lf: float | None = None,
                 schrodinger=False) -> PhaseReport:
    samples = default_samples(phi.n) if samples is None else samples
    rep = PhaseReport(phi.metadata(), samples.description)
    if snd:
        rep.checks["SND"] = check_snd(phi, samples)
    if fk is not None:
        rep.checks["F^k"] = check_fk(phi, fk, samples)
    if l2:
        rep.checks["L2"] = check_l2_condition(phi, samples)
    if lf is not None:
        rep.checks["LF"] = check_lf(phi, lf, samples)
    if schrodinger:
        rep.checks["Schrodinger"] = check_schrodinger_phase(phi, samples)
    return rep
