"""Taylor jets of the geodesic exponential map and of functions pulled back by it.

Polynomials in the fiber velocities ``v_j`` are kept as dictionaries from
exponent tuples to expression coefficients (``VPoly``); the base point of the
expansion is the chart's own coordinate symbols.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from itertools import product
from math import factorial
from typing import Mapping, Sequence

import numpy as np
import sympy

from .expr import EvaluationError, Expr, evaluate, simplify
from .geometry import Chart, Metric, christoffel, index_tuples, multinomial, multiplicity
from .operators import MultiIndex

MAX_ORDER = 6
RK4_STEPS = 1024

Monomial = tuple[int, ...]


class Cancelled(Exception):
    """Raised when a caller-supplied cancel event is set mid-computation."""


def _checkpoint(cancel: threading.Event | None):
    if cancel is not None and cancel.is_set():
        raise Cancelled()


class VPoly:
    """Polynomial in the velocity variables, optionally truncated."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[Monomial, Expr] | None = None):
        self.n = n
        self.terms = {}
        for mono, c in (terms or {}).items():
            if c != 0:
                self.terms[tuple(mono)] = c

    @classmethod
    def constant(cls, n: int, c) -> "VPoly":
        return cls(n, {(0,) * n: sympy.sympify(c)})

    @classmethod
    def var(cls, n: int, j: int) -> "VPoly":
        return cls(n, {tuple(1 if k == j else 0 for k in range(n)): sympy.Integer(1)})

    def __add__(self, other: "VPoly") -> "VPoly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return VPoly(self.n, out)

    def scale(self, c) -> "VPoly":
        return VPoly(self.n, {m: c * v for m, v in self.terms.items()})

    def mul(self, other: "VPoly", max_degree: int | None = None) -> "VPoly":
        out: dict[Monomial, Expr] = {}
        for ma, ca in self.terms.items():
            da = sum(ma)
            for mb, cb in other.terms.items():
                if max_degree is not None and da + sum(mb) > max_degree:
                    continue
                m = tuple(x + y for x, y in zip(ma, mb))
                out[m] = out.get(m, 0) + ca * cb
        return VPoly(self.n, out)

    def diff_coeffs(self, s: sympy.Symbol) -> "VPoly":
        return VPoly(self.n, {m: sympy.diff(c, s) for m, c in self.terms.items()})

    def diff_var(self, j: int) -> "VPoly":
        out = {}
        for m, c in self.terms.items():
            if m[j]:
                mm = list(m)
                mm[j] -= 1
                out[tuple(mm)] = m[j] * c
        return VPoly(self.n, out)

    def shift(self, j: int) -> "VPoly":
        out = {}
        for m, c in self.terms.items():
            mm = list(m)
            mm[j] += 1
            out[tuple(mm)] = c
        return VPoly(self.n, out)

    def homogeneous(self, degree: int) -> "VPoly":
        return VPoly(self.n, {m: c for m, c in self.terms.items() if sum(m) == degree})

    def without_constant(self) -> "VPoly":
        return VPoly(self.n, {m: c for m, c in self.terms.items() if sum(m) > 0})

    def simplified(self) -> "VPoly":
        return VPoly(self.n, {m: simplify(c) for m, c in self.terms.items()})

    def coefficient(self, mono: Monomial) -> Expr:
        return self.terms.get(tuple(mono), sympy.Integer(0))

    def to_expr(self, vars_: Sequence[sympy.Symbol]) -> Expr:
        total = sympy.Integer(0)
        for m, c in self.terms.items():
            term = c
            for v, k in zip(vars_, m):
                term *= v ** k
            total += term
        return total

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)


@dataclass(frozen=True, eq=False)
class JetMap:
    """x^j(exp(v)) expanded about v = 0 up to total degree ``order``."""

    chart: Chart
    order: int
    components: tuple[VPoly, ...]

    def coefficient(self, j: int, indices: Sequence[int]) -> Expr:
        """Symmetric coefficient c^j_{k1..km}, so that the degree-m part is
        sum over ordered (k1..km) of c^j_{k1..km} v^k1...v^km."""
        n = self.chart.dim
        mono = multiplicity(sorted(indices), n)
        return simplify(self.components[j].coefficient(mono) / multinomial(mono))

    def as_exprs(self) -> tuple[Expr, ...]:
        return tuple(p.to_expr(self.chart.velocities) for p in self.components)


@dataclass(frozen=True, eq=False)
class JetPullback:
    """f(exp(v)) truncated at degree ``order``.

    ``coeffs[monomial][alpha]`` is the coefficient of ``f_alpha`` (the
    alpha-th partial derivative of an abstract f at the base point) in the
    coefficient of the velocity monomial.
    """

    chart: Chart
    order: int
    coeffs: Mapping[Monomial, Mapping[MultiIndex, Expr]]

    def coefficient(self, mono: Monomial) -> dict[MultiIndex, Expr]:
        return dict(self.coeffs.get(tuple(mono), {}))

    def derivative_symbol(self, alpha: MultiIndex) -> sympy.Symbol:
        names = [c for c, k in zip(self.chart.coordinates, alpha) for _ in range(k)]
        return sympy.Symbol("_".join(["f", *names]))

    def as_expr(self) -> Expr:
        total = sympy.Integer(0)
        for mono, lin in self.coeffs.items():
            vm = sympy.Integer(1)
            for v, k in zip(self.chart.velocities, mono):
                vm *= v ** k
            for alpha, c in lin.items():
                total += c * self.derivative_symbol(alpha) * vm
        return total


_jet_cache: dict[tuple[Metric, int], JetMap] = {}
_pullback_cache: dict[tuple[Metric, int], JetPullback] = {}
_cache_lock = threading.Lock()


def geodesic_jet(g: Metric, K: int, cancel: threading.Event | None = None) -> JetMap:
    """Jet of exp by repeated total differentiation of x'' = -Γ(x)(x', x').

    With D = v^j d/dx^j + a^j d/dv^j and a^j = -Γ^j_rs v^r v^s, the m-th
    derivative of the geodesic at t = 0 is D^(m-1) v, and the degree-m part
    of the jet is that derivative divided by m!.
    """
    if not 2 <= K <= MAX_ORDER:
        raise ValueError(f"jet order must be in [2, {MAX_ORDER}], got {K}")
    key = (g, K)
    with _cache_lock:
        if key in _jet_cache:
            return _jet_cache[key]
    n = g.chart.dim
    x = g.chart.symbols
    gamma = christoffel(g)
    accel = []
    for j in range(n):
        terms: dict[Monomial, Expr] = {}
        for r, s in product(range(n), repeat=2):
            mono = multiplicity(sorted((r, s)), n)
            terms[mono] = terms.get(mono, 0) - gamma[j, r, s]
        accel.append(VPoly(n, terms).simplified())

    def total_derivative(F: VPoly) -> VPoly:
        out = VPoly(n)
        for j in range(n):
            out = out + F.diff_coeffs(x[j]).shift(j)
            out = out + F.diff_var(j).mul(accel[j])
        return out.simplified()

    derivs = [[VPoly.var(n, j) for j in range(n)], accel]
    for _ in range(3, K + 1):
        _checkpoint(cancel)
        derivs.append([total_derivative(F) for F in derivs[-1]])
    comps = []
    for j in range(n):
        poly = VPoly.constant(n, x[j])
        for m, level in enumerate(derivs, start=1):
            poly = poly + level[j].scale(sympy.Rational(1, factorial(m)))
        comps.append(poly.simplified())
    jet = JetMap(g.chart, K, tuple(comps))
    with _cache_lock:
        _jet_cache[key] = jet
    return jet


def pullback(jet: JetMap, K: int, cancel: threading.Event | None = None) -> JetPullback:
    """f(x0 + d(v)) = sum_alpha f_alpha d^alpha / alpha!, truncated at degree K."""
    if not 0 <= K <= jet.order:
        raise ValueError(f"pullback order {K} exceeds jet order {jet.order}")
    n = jet.chart.dim
    deltas = [c.without_constant() for c in jet.components]
    powers = []
    for d in deltas:
        row = [VPoly.constant(n, 1)]
        for _ in range(K):
            row.append(row[-1].mul(d, K))
        powers.append(row)
    coeffs: dict[Monomial, dict[MultiIndex, Expr]] = {}
    for size in range(K + 1):
        for idx in index_tuples(n, size):
            _checkpoint(cancel)
            alpha = multiplicity(idx, n)
            term = VPoly.constant(n, 1)
            weight = 1
            for j, k in enumerate(alpha):
                if k:
                    term = term.mul(powers[j][k], K)
                    weight *= factorial(k)
            for mono, c in term.terms.items():
                c = simplify(c / weight)
                if c != 0:
                    coeffs.setdefault(mono, {})[alpha] = c
    return JetPullback(jet.chart, K, coeffs)


def pullback_for(g: Metric, K: int, cancel: threading.Event | None = None) -> JetPullback:
    key = (g, K)
    with _cache_lock:
        if key in _pullback_cache:
            return _pullback_cache[key]
    pb = pullback(geodesic_jet(g, max(K, 2), cancel), K, cancel)
    with _cache_lock:
        _pullback_cache[key] = pb
    return pb


class GeodesicError(RuntimeError):
    pass


def _christoffel_numeric(g: Metric):
    n = g.chart.dim
    gamma = christoffel(g)
    table = sympy.Matrix(n, n * n, lambda j, rs: gamma[j, rs // n, rs % n])
    fn = sympy.lambdify(g.chart.symbols, table, modules="numpy")

    def at(x):
        return np.asarray(fn(*x), dtype=float).reshape(n, n, n)

    return at


def exp_numeric(g: Metric, x0: Sequence[float], v: Sequence[float], steps: int = RK4_STEPS) -> np.ndarray:
    """Endpoint at t = 1 of the geodesic with x(0) = x0, x'(0) = v (fixed-step RK4)."""
    n = g.chart.dim
    gamma = _christoffel_numeric(g)
    bounds = np.array(g.chart.intervals)
    h = 1.0 / steps

    def rhs(state):
        x, u = state[:n], state[n:]
        acc = -np.einsum("jrs,r,s->j", gamma(x), u, u)
        return np.concatenate([u, acc])

    state = np.concatenate([np.asarray(x0, float), np.asarray(v, float)])
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise GeodesicError("non-finite state during integration")
        x = state[:n]
        if np.any(x < bounds[:, 0]) or np.any(x > bounds[:, 1]):
            raise GeodesicError(f"geodesic left the probe domain at {x}")
    return state[:n]


def evaluate_jet(jet: JetMap, x0: Sequence[float], v: Sequence[float]) -> np.ndarray:
    point = dict(zip(jet.chart.coordinates, map(float, x0)))
    point.update({s.name: float(c) for s, c in zip(jet.chart.velocities, v)})
    out = []
    for e in jet.as_exprs():
        value = evaluate(e, point)
        if abs(value.imag) > 1e-12:
            raise EvaluationError("jet evaluated to a complex point")
        out.append(value.real)
    return np.array(out)
