"""Linear differential operators with expression coefficients."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb
from typing import TYPE_CHECKING, Mapping

import sympy

from .expr import Expr, ProbeDomain, as_expr, probably_zero, simplify, to_text

if TYPE_CHECKING:
    from .geometry import Chart

MultiIndex = tuple[int, ...]


class ChartMismatchError(ValueError):
    pass


def check_same_chart(*objs):
    charts = {o.chart for o in objs}
    if len(charts) > 1:
        raise ChartMismatchError("objects live on different charts")


@dataclass(frozen=True, eq=False)
class DiffOperator:
    """``sum_alpha c_alpha d^alpha`` with alpha a per-coordinate order tuple."""

    chart: "Chart"
    coeffs: Mapping[MultiIndex, Expr]

    def __post_init__(self):
        n = self.chart.dim
        clean = {}
        for alpha, c in self.coeffs.items():
            alpha = tuple(alpha)
            if len(alpha) != n or any(k < 0 for k in alpha):
                raise ValueError(f"bad multi-index {alpha} for a {n}-dimensional chart")
            c = simplify(as_expr(c))
            if c != 0:
                clean[alpha] = clean.get(alpha, 0) + c
        object.__setattr__(self, "coeffs", {a: clean[a] for a in sorted(clean, key=_order_key)})

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, chart) -> "DiffOperator":
        return cls(chart, {})

    @classmethod
    def multiplication(cls, chart, f) -> "DiffOperator":
        return cls(chart, {(0,) * chart.dim: as_expr(f)})

    @classmethod
    def identity(cls, chart) -> "DiffOperator":
        return cls.multiplication(chart, 1)

    @classmethod
    def partial(cls, chart, j: int, coeff=1) -> "DiffOperator":
        return cls(chart, {unit(chart.dim, j): as_expr(coeff)})

    # structure ----------------------------------------------------------

    @property
    def order(self) -> int:
        return max((sum(a) for a in self.coeffs), default=0)

    def coefficient(self, alpha) -> Expr:
        return self.coeffs.get(tuple(alpha), sympy.Integer(0))

    def part(self, order: int) -> "DiffOperator":
        return DiffOperator(self.chart, {a: c for a, c in self.coeffs.items() if sum(a) == order})

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        return self.chart == other.chart and self.coeffs == other.coeffs

    __hash__ = None

    def probably_equal(self, other: "DiffOperator", domain: ProbeDomain | None = None) -> bool:
        check_same_chart(self, other)
        diff = self - other
        domain = domain or self.chart.probe_domain()
        return all(probably_zero(c, domain) for c in diff.coeffs.values())

    def probably_zero(self, domain: ProbeDomain | None = None) -> bool:
        domain = domain or self.chart.probe_domain()
        return all(probably_zero(c, domain) for c in self.coeffs.values())

    # algebra ------------------------------------------------------------

    def __add__(self, other: "DiffOperator") -> "DiffOperator":
        check_same_chart(self, other)
        out = dict(self.coeffs)
        for a, c in other.coeffs.items():
            out[a] = out.get(a, 0) + c
        return DiffOperator(self.chart, out)

    def __neg__(self) -> "DiffOperator":
        return self.scale(-1)

    def __sub__(self, other: "DiffOperator") -> "DiffOperator":
        return self + (-other)

    def scale(self, f) -> "DiffOperator":
        """Left multiplication by a function."""
        f = as_expr(f)
        return DiffOperator(self.chart, {a: f * c for a, c in self.coeffs.items()})

    def __matmul__(self, other: "DiffOperator") -> "DiffOperator":
        return compose(self, other)

    def apply(self, f) -> Expr:
        f = as_expr(f)
        syms = self.chart.symbols
        total = sympy.Integer(0)
        for alpha, c in self.coeffs.items():
            total += c * derivative(f, syms, alpha)
        return simplify(total)

    def describe(self) -> list[tuple[str, str]]:
        """Rows of (derivative label, coefficient text)."""
        return [(self.chart.derivative_label(a), to_text(c)) for a, c in self.coeffs.items()]

    def __repr__(self):
        rows = ", ".join(f"{d}: {c}" for d, c in self.describe())
        return f"DiffOperator({{{rows}}})"


def _order_key(alpha):
    return (sum(alpha), tuple(-k for k in alpha))


def unit(n: int, j: int) -> MultiIndex:
    return tuple(1 if k == j else 0 for k in range(n))


def derivative(f: Expr, syms, alpha: MultiIndex) -> Expr:
    for s, k in zip(syms, alpha):
        if k:
            f = sympy.diff(f, s, k)
    return f


def compose(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    """A∘B by the multivariate Leibniz rule."""
    check_same_chart(A, B)
    syms = A.chart.symbols
    out: dict[MultiIndex, Expr] = {}
    for alpha, a in A.coeffs.items():
        for beta, b in B.coeffs.items():
            for gamma in product(*(range(k + 1) for k in alpha)):
                weight = 1
                for k, g in zip(alpha, gamma):
                    weight *= comb(k, g)
                db = derivative(b, syms, gamma)
                if db == 0:
                    continue
                target = tuple(k - g + m for k, g, m in zip(alpha, gamma, beta))
                out[target] = out.get(target, 0) + weight * a * db
    return DiffOperator(A.chart, out)


def commutator(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    return compose(A, B) - compose(B, A)
