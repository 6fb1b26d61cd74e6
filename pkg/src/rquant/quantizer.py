"""Quantization of classical magnitudes and the operator algebra around it.

A symmetric covariant tensor ``a`` of degree m is read three ways: as a
polynomial in velocities on TM (its classical magnitude), as a constant
coefficient operator in the fiber derivatives d/dv (its vertical operator,
carrying the factor (-i hbar)^m after raising indices with the metric), and
as the operator on functions obtained by letting the vertical operator act on
f(exp(v)) and restricting to v = 0.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from math import factorial
from typing import Mapping

import numpy as np
import sympy

from .expr import HBAR, Expr, as_expr, evaluate, simplify
from .expmap import pullback_for
from .geometry import (
    Chart,
    Metric,
    SymCoTensor,
    inverse_metric,
    multinomial,
    multiplicity,
    raise_indices,
)
from .operators import DiffOperator, MultiIndex, check_same_chart, commutator, compose

MAX_QUANTIZE_DEGREE = 6
MAX_ALGEBRA_DEGREE = 3

MINUS_I_HBAR = -sympy.I * HBAR


class DegreeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# magnitudes


@dataclass(frozen=True, eq=False)
class ClassicalMagnitude:
    """Polynomial in the chart's velocity symbols ``v_<coord>``."""

    chart: Chart
    expr: Expr

    def __post_init__(self):
        object.__setattr__(self, "expr", simplify(as_expr(self.expr)))

    def terms(self) -> dict[tuple[int, ...], Expr]:
        """Velocity exponent tuple -> coefficient."""
        vel = self.chart.velocities
        if self.expr == 0:
            return {}
        poly = sympy.Poly(sympy.expand(self.expr), *vel)
        return {m: simplify(c) for m, c in poly.as_dict(native=False).items() if simplify(c) != 0}

    @property
    def degrees(self) -> set[int]:
        return {sum(m) for m in self.terms()}

    def __eq__(self, other):
        return isinstance(other, ClassicalMagnitude) and self.chart == other.chart and self.expr == other.expr

    __hash__ = None


def magnitude_of(a: SymCoTensor) -> ClassicalMagnitude:
    """Replace dx^j by v^j in the symmetric polynomial of ``a``."""
    n = a.chart.dim
    vel = a.chart.velocities
    total = sympy.Integer(0)
    for idx, c in a.components.items():
        mono = multiplicity(idx, n)
        term = multinomial(mono) * c
        for v, k in zip(vel, mono):
            term *= v ** k
        total += term
    return ClassicalMagnitude(a.chart, total)


def tensor_of(mag: ClassicalMagnitude, degree: int | None = None) -> SymCoTensor:
    """Inverse of ``magnitude_of`` for homogeneous magnitudes."""
    terms = mag.terms()
    degrees = {sum(m) for m in terms}
    if len(degrees) > 1:
        raise DegreeError(f"magnitude is not homogeneous (degrees {sorted(degrees)})")
    if degree is None:
        if not degrees:
            raise DegreeError("zero magnitude needs an explicit degree")
        degree = degrees.pop()
    elif degrees and degrees != {degree}:
        raise DegreeError(f"magnitude has degree {degrees.pop()}, not {degree}")
    comps = {}
    for mono, c in terms.items():
        idx = tuple(k for k, e in enumerate(mono) for _ in range(e))
        comps[idx] = c / multinomial(mono)
    return SymCoTensor(mag.chart, degree, comps)


# ---------------------------------------------------------------------------
# vertical operators and quantization


@dataclass(frozen=True, eq=False)
class VerticalOperator:
    """factor * sum over ordered (k1..km) of coeffs[k] d/dv^k1 ... d/dv^km."""

    chart: Chart
    degree: int
    coeffs: Mapping[tuple[int, ...], Expr]
    factor: Expr

    def apply_at_zero(self, fhat_coeffs: Mapping[tuple[int, ...], Mapping]) -> dict[MultiIndex, Expr]:
        """Apply to a velocity polynomial and restrict to v = 0.

        ``fhat_coeffs`` maps velocity monomials to linear combinations (dicts).
        d^beta_v v^beta = beta!, and a sorted index tuple with multiplicity beta
        occurs m!/beta! times among ordered tuples, so each contributes m!.
        """
        n = self.chart.dim
        out: dict[MultiIndex, Expr] = {}
        for idx, c in self.coeffs.items():
            mono = multiplicity(idx, n)
            for alpha, w in fhat_coeffs.get(mono, {}).items():
                out[alpha] = out.get(alpha, 0) + factorial(self.degree) * c * w
        return {a: self.factor * c for a, c in out.items()}


def vertical_operator(a: SymCoTensor, g: Metric) -> VerticalOperator:
    check_same_chart(a, g)
    return VerticalOperator(a.chart, a.degree, raise_indices(a, g), MINUS_I_HBAR ** a.degree)


def quantize(a: SymCoTensor, g: Metric, cancel: threading.Event | None = None) -> DiffOperator:
    check_same_chart(a, g)
    m = a.degree
    if m > MAX_QUANTIZE_DEGREE:
        raise DegreeError(f"quantize supports degree <= {MAX_QUANTIZE_DEGREE}, got {m}")
    if m == 0:
        return DiffOperator.multiplication(a.chart, a.component(()))
    vert = vertical_operator(a, g)
    fhat = pullback_for(g, m, cancel)
    return DiffOperator(a.chart, vert.apply_at_zero(fhat.coeffs))


def principal_symbol(a: SymCoTensor, g: Metric) -> DiffOperator:
    """Expected top-order block: (-i hbar)^m times the raised components,
    repackaged from ordered index tuples onto derivative multi-indices."""
    n = a.chart.dim
    factor = MINUS_I_HBAR ** a.degree
    coeffs = {}
    for idx, c in raise_indices(a, g).items():
        mono = multiplicity(idx, n)
        coeffs[mono] = factor * multinomial(mono) * c
    return DiffOperator(a.chart, coeffs)


def momentum_tensor(g: Metric, j: int) -> SymCoTensor:
    """p_j = g_{jl} dx^l."""
    return SymCoTensor.covector(g.chart, [g[j, l] for l in range(g.chart.dim)])


def metric_tensor(g: Metric) -> SymCoTensor:
    return SymCoTensor.from_metric(g)


# ---------------------------------------------------------------------------
# algebra


def _check_algebra_degree(*tensors):
    for t in tensors:
        if t.degree > MAX_ALGEBRA_DEGREE:
            raise DegreeError(f"algebra operations support degree <= {MAX_ALGEBRA_DEGREE}")


def quantization_defect_square(a: SymCoTensor, g: Metric) -> DiffOperator:
    """quantize(a*a) - quantize(a)∘quantize(a)."""
    _check_algebra_degree(a)
    qa = quantize(a, g)
    return quantize(a * a, g) - compose(qa, qa)


def _to_momenta(mag: ClassicalMagnitude, g: Metric) -> Expr:
    n = g.chart.dim
    ginv = inverse_metric(g)
    p = g.chart.momenta
    subs = {v: sum(ginv[k][j] * p[j] for j in range(n)) for k, v in enumerate(g.chart.velocities)}
    return mag.expr.xreplace(subs)


def _from_momenta(F: Expr, g: Metric) -> Expr:
    n = g.chart.dim
    v = g.chart.velocities
    subs = {p: sum(g[j, k] * v[k] for k in range(n)) for j, p in enumerate(g.chart.momenta)}
    return F.xreplace(subs)


def poisson_bracket(a: ClassicalMagnitude, b: ClassicalMagnitude, g: Metric) -> ClassicalMagnitude:
    """{F, G} = sum_j dF/dp_j dG/dx^j - dF/dx^j dG/dp_j, computed on T*M."""
    check_same_chart(a, b, g)
    F, G = _to_momenta(a, g), _to_momenta(b, g)
    total = sympy.Integer(0)
    for x, p in zip(g.chart.symbols, g.chart.momenta):
        total += sympy.diff(F, p) * sympy.diff(G, x) - sympy.diff(F, x) * sympy.diff(G, p)
    return ClassicalMagnitude(g.chart, sympy.expand(_from_momenta(total, g)))


def max_derivative_order(e: Expr, functions=None) -> int:
    """Largest total derivative order of undefined functions inside ``e``."""
    best = 0
    for d in sympy.sympify(e).atoms(sympy.Derivative):
        if functions is not None and d.expr.func not in functions:
            continue
        best = max(best, sum(count for _, count in d.variable_count))
    return best


def generic_coefficients(a: SymCoTensor, prefix: str) -> tuple[SymCoTensor, set]:
    """Replace each non-constant component by an undefined function of the
    coordinates it depends on; constants stay."""
    coords = a.chart.symbols
    comps, funcs = {}, set()
    for idx, c in a.components.items():
        deps = [x for x in coords if x in c.free_symbols]
        if not deps:
            comps[idx] = c
            continue
        name = prefix + "".join(map(str, idx))
        fn = sympy.Function(name)
        funcs.add(fn)
        comps[idx] = fn(*deps)
    return SymCoTensor(a.chart, a.degree, comps), funcs


@dataclass
class BracketReport:
    defect: DiffOperator
    is_zero: bool
    max_coeff_derivative_order: int
    commutator_order: int
    bracket: ClassicalMagnitude = field(repr=False)


def _bracket_defect(a: SymCoTensor, b: SymCoTensor, g: Metric):
    qa, qb = quantize(a, g), quantize(b, g)
    comm = commutator(qa, qb)
    bracket = poisson_bracket(magnitude_of(a), magnitude_of(b), g)
    deg = a.degree + b.degree - 1
    if deg < 0 or bracket.expr == 0:
        classical = DiffOperator.zero(g.chart)
    else:
        classical = quantize(tensor_of(bracket, deg), g).scale(MINUS_I_HBAR)
    return comm - classical, comm, bracket


def bracket_vs_commutator_report(a: SymCoTensor, b: SymCoTensor, g: Metric, seed: int = 42) -> BracketReport:
    """Compare [â, b̂] with (-i hbar) times the quantized Poisson bracket.

    ``max_coeff_derivative_order`` is measured by rerunning the comparison
    with the non-constant coefficients of a and b replaced by generic
    functions and scanning the defect for derivatives of those functions.
    """
    check_same_chart(a, b, g)
    _check_algebra_degree(a, b)
    defect, comm, bracket = _bracket_defect(a, b, g)
    is_zero = defect.probably_zero(g.chart.probe_domain(seed=seed))
    ga, fa = generic_coefficients(a, "A")
    gb, fb = generic_coefficients(b, "B")
    generic_defect, _, _ = _bracket_defect(ga, gb, g)
    order = max((max_derivative_order(c, fa | fb) for c in generic_defect.coeffs.values()), default=0)
    return BracketReport(defect, is_zero, order, comm.order, bracket)


# ---------------------------------------------------------------------------
# fiberwise Fourier transform


class NonDecayingError(ValueError):
    pass


@dataclass(frozen=True)
class FourierFiberSpec:
    """One fiber, kernel exp(+i p v / hbar), trapezoid rule on [-L, L]."""

    half_width: float = 12.0
    points: int = 4096
    hbar: float = 1.0
    normalization: float = 1.0
    p_max: float = 4.0
    dp: float = 5e-4
    chunk: int = 512

    def __post_init__(self):
        n = self.points
        if n < 256 or n & (n - 1):
            raise ValueError("point count must be a power of two >= 256")
        if self.half_width <= 0 or self.dp <= 0 or self.p_max <= 0:
            raise ValueError("half width, p_max and dp must be positive")

    @property
    def velocity_grid(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.points)

    @property
    def weights(self) -> np.ndarray:
        h = 2 * self.half_width / (self.points - 1)
        w = np.full(self.points, h)
        w[0] = w[-1] = h / 2
        return self.normalization * w

    @property
    def momentum_grid(self) -> np.ndarray:
        m = int(round(self.p_max / self.dp))
        return self.dp * np.arange(-m, m + 1)

    def transform(self, samples: np.ndarray, p: np.ndarray) -> np.ndarray:
        v = self.velocity_grid
        wf = self.weights * samples
        out = np.empty(p.shape, dtype=complex)
        for start in range(0, p.size, self.chunk):
            block = p[start : start + self.chunk]
            out[start : start + self.chunk] = np.exp(1j * np.outer(block, v) / self.hbar) @ wf
        return out


def fourier_correspondence_check(spec: FourierFiberSpec, f, variable: str = "v") -> float:
    """max_p |F(v f) - (-i hbar) dF f/dp| / max_p |F f| on the momentum grid."""
    f = as_expr(f)
    v = spec.velocity_grid
    samples = evaluate(f, {variable: v}, hbar=spec.hbar)
    samples = np.broadcast_to(np.asarray(samples, dtype=complex), v.shape)
    peak = np.max(np.abs(samples))
    if peak == 0:
        return 0.0
    if max(abs(samples[0]), abs(samples[-1])) > 1e-10 * peak:
        raise NonDecayingError("f does not decay at the ends of the fiber grid")
    p = spec.momentum_grid
    Ff = spec.transform(samples, p)
    Fvf = spec.transform(v * samples, p)
    dF = (Ff[2:] - Ff[:-2]) / (2 * spec.dp)
    err = np.max(np.abs(Fvf[1:-1] - (-1j * spec.hbar) * dF))
    return float(err / np.max(np.abs(Ff)))


__all__ = [
    "BracketReport",
    "ClassicalMagnitude",
    "DegreeError",
    "FourierFiberSpec",
    "NonDecayingError",
    "VerticalOperator",
    "bracket_vs_commutator_report",
    "commutator",
    "compose",
    "fourier_correspondence_check",
    "magnitude_of",
    "max_derivative_order",
    "metric_tensor",
    "momentum_tensor",
    "poisson_bracket",
    "principal_symbol",
    "quantization_defect_square",
    "quantize",
    "tensor_of",
    "vertical_operator",
]
