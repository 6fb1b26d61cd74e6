"""Charts, metrics, symmetric tensors, Christoffel symbols, Laplace-Beltrami."""
from __future__ import annotations

import functools
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement, product
from math import factorial
from typing import Mapping, Sequence

import numpy as np
import sympy

from .expr import (
    RESERVED,
    EvaluationError,
    Expr,
    ProbeDomain,
    as_expr,
    evaluate,
    probe_points,
    simplify,
)
from .operators import ChartMismatchError, DiffOperator, MultiIndex, check_same_chart


class DegenerateMetricError(ValueError):
    pass


class IndefiniteMetricError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    coordinates: tuple[str, ...]
    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        coords = tuple(self.coordinates)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "intervals", tuple(tuple(map(float, iv)) for iv in self.intervals))
        if not coords:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        if len(self.intervals) != len(coords):
            raise ValueError("one probe interval per coordinate is required")
        derived = {n for c in coords for n in (f"v_{c}", f"p_{c}")}
        for c, (lo, hi) in zip(coords, self.intervals):
            if c in RESERVED:
                raise ValueError(f"coordinate name {c!r} is reserved")
            if c in derived:
                raise ValueError(f"coordinate name {c!r} clashes with a velocity/momentum name")
            if not lo < hi:
                raise ValueError(f"empty probe interval for {c!r}")

    @classmethod
    def of(cls, **intervals) -> "Chart":
        return cls(tuple(intervals), tuple(intervals.values()))

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def symbols(self) -> tuple[sympy.Symbol, ...]:
        return tuple(sympy.Symbol(c) for c in self.coordinates)

    @property
    def velocities(self) -> tuple[sympy.Symbol, ...]:
        return tuple(sympy.Symbol(f"v_{c}") for c in self.coordinates)

    @property
    def momenta(self) -> tuple[sympy.Symbol, ...]:
        return tuple(sympy.Symbol(f"p_{c}") for c in self.coordinates)

    def index(self, name: str) -> int:
        try:
            return self.coordinates.index(name)
        except ValueError:
            raise KeyError(f"unknown coordinate {name!r}") from None

    def probe_domain(self, hbar: float = 1.0, seed: int = 42, **extra) -> ProbeDomain:
        intervals = dict(zip(self.coordinates, self.intervals))
        intervals.update(extra)
        return ProbeDomain(intervals, hbar=hbar, seed=seed)

    def derivative_label(self, alpha: MultiIndex) -> str:
        if not any(alpha):
            return "1"
        parts = []
        for c, k in zip(self.coordinates, alpha):
            parts.extend([c] * k)
        return "d_" + ",".join(parts)


def sorted_index(indices: Sequence[int]) -> tuple[int, ...]:
    return tuple(sorted(indices))


def multiplicity(indices: Sequence[int], n: int) -> tuple[int, ...]:
    """Sorted index tuple -> per-coordinate counts (the monomial exponent)."""
    counts = Counter(indices)
    return tuple(counts.get(k, 0) for k in range(n))


def multinomial(counts: Sequence[int]) -> int:
    out = factorial(sum(counts))
    for k in counts:
        out //= factorial(k)
    return out


def index_tuples(n: int, m: int):
    return combinations_with_replacement(range(n), m)


@dataclass(frozen=True, eq=False)
class Metric:
    chart: Chart
    components: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(simplify(as_expr(c)) for c in row) for row in self.components)
        object.__setattr__(self, "components", rows)
        n = self.chart.dim
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"metric must be {n}x{n}")
        for i in range(n):
            for j in range(i + 1, n):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"metric is not symmetric at [{i}][{j}]")
        det = self.det
        try:
            for _, (value,) in probe_points(self.chart.probe_domain(), [det]):
                if value == 0:
                    raise DegenerateMetricError("metric determinant vanishes at a probe point")
        except EvaluationError as exc:
            raise DegenerateMetricError(str(exc)) from exc

    def __eq__(self, other):
        return isinstance(other, Metric) and (self.chart, self.components) == (other.chart, other.components)

    def __hash__(self):
        return hash((self.chart, self.components))

    def __getitem__(self, ij) -> Expr:
        i, j = ij
        return self.components[i][j]

    @property
    def matrix(self) -> sympy.Matrix:
        return sympy.Matrix(self.components)

    @functools.cached_property
    def det(self) -> Expr:
        return simplify(self.matrix.det(method="berkowitz"))


@dataclass(frozen=True, eq=False)
class SymCoTensor:
    """Symmetric covariant tensor stored on sorted index tuples."""

    chart: Chart
    degree: int
    components: Mapping[tuple[int, ...], Expr]

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        n = self.chart.dim
        clean = {}
        for idx, c in self.components.items():
            idx = tuple(idx)
            if len(idx) != self.degree or any(not 0 <= k < n for k in idx):
                raise ValueError(f"index {idx} invalid for degree {self.degree} on a {n}-chart")
            if idx != sorted_index(idx):
                raise ValueError(f"index {idx} is not sorted")
            c = simplify(as_expr(c))
            if c != 0:
                clean[idx] = c
        object.__setattr__(self, "components", dict(sorted(clean.items())))

    @classmethod
    def scalar(cls, chart: Chart, f) -> "SymCoTensor":
        return cls(chart, 0, {(): as_expr(f)})

    @classmethod
    def covector(cls, chart: Chart, comps: Sequence) -> "SymCoTensor":
        return cls(chart, 1, {(k,): c for k, c in enumerate(comps)})

    @classmethod
    def from_metric(cls, g: Metric) -> "SymCoTensor":
        n = g.chart.dim
        return cls(g.chart, 2, {(i, j): g[i, j] for i, j in index_tuples(n, 2)})

    @classmethod
    def from_indices(cls, chart: Chart, degree: int, comps: Mapping) -> "SymCoTensor":
        """Accept unsorted index tuples; entries sharing a sorted key must agree."""
        out: dict = {}
        for idx, c in comps.items():
            key = sorted_index(idx)
            c = as_expr(c)
            if key in out and simplify(out[key] - c) != 0:
                raise ValueError(f"conflicting components for index {key}")
            out[key] = c
        return cls(chart, degree, out)

    def component(self, idx: Sequence[int]) -> Expr:
        return self.components.get(sorted_index(idx), sympy.Integer(0))

    def scale(self, f) -> "SymCoTensor":
        f = as_expr(f)
        return SymCoTensor(self.chart, self.degree, {k: f * c for k, c in self.components.items()})

    def __add__(self, other: "SymCoTensor") -> "SymCoTensor":
        check_same_chart(self, other)
        if self.degree != other.degree:
            raise ValueError("cannot add tensors of different degree")
        out = dict(self.components)
        for k, c in other.components.items():
            out[k] = out.get(k, 0) + c
        return SymCoTensor(self.chart, self.degree, out)

    def __mul__(self, other: "SymCoTensor") -> "SymCoTensor":
        """Symmetric product: the magnitude of a*b is the product of magnitudes."""
        check_same_chart(self, other)
        n, m = self.chart.dim, self.degree + other.degree
        poly: dict[tuple[int, ...], Expr] = {}
        for ia, ca in self.components.items():
            for ib, cb in other.components.items():
                ea, eb = multiplicity(ia, n), multiplicity(ib, n)
                e = tuple(x + y for x, y in zip(ea, eb))
                w = multinomial(ea) * multinomial(eb)
                poly[e] = poly.get(e, 0) + w * ca * cb
        comps = {}
        for e, c in poly.items():
            idx = tuple(k for k in range(n) for _ in range(e[k]))
            comps[idx] = c / multinomial(e)
        return SymCoTensor(self.chart, m, comps)


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        comps = tuple(simplify(as_expr(c)) for c in self.components)
        if len(comps) != self.chart.dim:
            raise ValueError("vector field needs one component per coordinate")
        object.__setattr__(self, "components", comps)


@functools.lru_cache(maxsize=64)
def inverse_metric(g: Metric) -> tuple[tuple[Expr, ...], ...]:
    det = g.det
    n = g.chart.dim
    adj = g.matrix.adjugate(method="berkowitz")
    inv = tuple(tuple(simplify(adj[i, j] / det) for j in range(n)) for i in range(n))
    return inv


@dataclass(frozen=True, eq=False)
class ChristoffelField:
    chart: Chart
    # components[j][r][s] = Γ^j_{rs}; [j][r][s] and [j][s][r] are the same object
    components: tuple[tuple[tuple[Expr, ...], ...], ...]

    def __getitem__(self, jrs) -> Expr:
        j, r, s = jrs
        return self.components[j][r][s]

    def nonzero(self):
        n = self.chart.dim
        for j in range(n):
            for r, s in index_tuples(n, 2):
                if self.components[j][r][s] != 0:
                    yield (j, r, s), self.components[j][r][s]


@functools.lru_cache(maxsize=64)
def christoffel(g: Metric) -> ChristoffelField:
    n = g.chart.dim
    x = g.chart.symbols
    ginv = inverse_metric(g)
    # first-kind symbols [rs, m] = (d_r g_ms + d_s g_mr - d_m g_rs) / 2
    dg = [[[sympy.diff(g[a, b], x[c]) for c in range(n)] for b in range(n)] for a in range(n)]
    comps = [[[None] * n for _ in range(n)] for _ in range(n)]
    for r, s in index_tuples(n, 2):
        first = [(dg[m][s][r] + dg[m][r][s] - dg[r][s][m]) / 2 for m in range(n)]
        for j in range(n):
            value = simplify(sum(ginv[j][m] * first[m] for m in range(n)))
            comps[j][r][s] = value
            comps[j][s][r] = value
    return ChristoffelField(g.chart, tuple(tuple(tuple(row) for row in plane) for plane in comps))


def _contract(a_comp, mat, n: int, m: int) -> dict[tuple[int, ...], Expr]:
    out = {}
    for K in index_tuples(n, m):
        total = sympy.Integer(0)
        for J in product(range(n), repeat=m):
            c = a_comp(sorted_index(J))
            if c == 0:
                continue
            w = sympy.Integer(1)
            for k, j in zip(K, J):
                w *= mat[k][j]
                if w == 0:
                    break
            total += w * c
        value = simplify(total)
        if value != 0:
            out[K] = value
    return out


def raise_indices(a: SymCoTensor, g: Metric) -> dict[tuple[int, ...], Expr]:
    """Contravariant components g^{k1 j1}...g^{km jm} a_{j1...jm} on sorted tuples."""
    check_same_chart(a, g)
    return _contract(a.component, inverse_metric(g), a.chart.dim, a.degree)


def lower_indices(comps: Mapping[tuple[int, ...], Expr], degree: int, g: Metric) -> SymCoTensor:
    def get(idx):
        return comps.get(idx, sympy.Integer(0))

    return SymCoTensor(g.chart, degree, _contract(get, g.components, g.chart.dim, degree))


def _signature_sign(g: Metric) -> int:
    """+1 or -1 if g is definite (of that sign) at every probe point."""
    n = g.chart.dim
    entries = [g[i, j] for i in range(n) for j in range(n)]
    signs = set()
    for _, values in probe_points(g.chart.probe_domain(), entries):
        mat = np.array(values, dtype=complex).reshape(n, n).real
        eig = np.linalg.eigvalsh(mat)
        if np.all(eig > 0):
            signs.add(1)
        elif np.all(eig < 0):
            signs.add(-1)
        else:
            raise IndefiniteMetricError("metric is indefinite on the probe domain")
    if len(signs) != 1:
        raise IndefiniteMetricError("metric changes signature on the probe domain")
    return signs.pop()


def laplace_beltrami(g: Metric) -> DiffOperator:
    """Divergence form |g|^{-1/2} d_k(|g|^{1/2} g^{kl} d_l), expanded."""
    n = g.chart.dim
    x = g.chart.symbols
    sign = _signature_sign(g)
    abs_det = sign ** n * g.det
    root = sympy.sqrt(abs_det)
    ginv = inverse_metric(g)
    coeffs: dict[MultiIndex, Expr] = {}
    for k in range(n):
        for l in range(n):
            alpha = [0] * n
            alpha[k] += 1
            alpha[l] += 1
            alpha = tuple(alpha)
            coeffs[alpha] = coeffs.get(alpha, 0) + ginv[k][l]
    for l in range(n):
        alpha = tuple(1 if i == l else 0 for i in range(n))
        first = sum(sympy.diff(root * ginv[k][l], x[k]) for k in range(n)) / root
        coeffs[alpha] = coeffs.get(alpha, 0) + first
    return DiffOperator(g.chart, coeffs)


def connection_laplacian(g: Metric) -> DiffOperator:
    """g^{kl}(d_k d_l - Γ^j_{kl} d_j), the form produced by quantizing the metric."""
    n = g.chart.dim
    ginv = inverse_metric(g)
    gamma = christoffel(g)
    coeffs: dict[MultiIndex, Expr] = {}
    for k in range(n):
        for l in range(n):
            if ginv[k][l] == 0:
                continue
            alpha = [0] * n
            alpha[k] += 1
            alpha[l] += 1
            coeffs[tuple(alpha)] = coeffs.get(tuple(alpha), 0) + ginv[k][l]
            for j in range(n):
                beta = tuple(1 if i == j else 0 for i in range(n))
                coeffs[beta] = coeffs.get(beta, 0) - ginv[k][l] * gamma[j, k, l]
    return DiffOperator(g.chart, coeffs)


__all__ = [
    "Chart",
    "ChartMismatchError",
    "ChristoffelField",
    "DegenerateMetricError",
    "IndefiniteMetricError",
    "Metric",
    "SymCoTensor",
    "VectorField",
    "christoffel",
    "connection_laplacian",
    "inverse_metric",
    "laplace_beltrami",
    "lower_indices",
    "raise_indices",
]
