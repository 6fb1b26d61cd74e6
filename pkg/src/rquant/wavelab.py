"""Wave equations of quantized magnitudes on 1D grids."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
import sympy

from .expr import EvaluationError, Expr, as_expr, differentiate, evaluate, free_names, simplify
from .geometry import Metric, SymCoTensor, VectorField, inverse_metric
from .operators import DiffOperator, check_same_chart
from .quantizer import ClassicalMagnitude, quantize

SYMMETRY_TOL = 1e-10
RESIDUAL_TOL = 1e-8


class DiscretizationError(ValueError):
    pass


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Dirichlet: n interior points, spacing (hi - lo)/(n + 1), psi = 0 at lo and hi.
    Periodic: n samples of [lo, hi), spacing (hi - lo)/n."""

    coordinate: str
    lo: float
    hi: float
    n: int
    boundary: Literal["dirichlet", "periodic"] = "dirichlet"
    hbar: float = 1.0

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 points")
        if not self.lo < self.hi:
            raise ValueError("grid interval is empty")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary condition {self.boundary!r}")

    @property
    def step(self) -> float:
        if self.boundary == "periodic":
            return (self.hi - self.lo) / self.n
        return (self.hi - self.lo) / (self.n + 1)

    @property
    def points(self) -> np.ndarray:
        h = self.step
        offset = 0 if self.boundary == "periodic" else 1
        return self.lo + h * (np.arange(self.n) + offset)

    def sample(self, e) -> np.ndarray:
        """Evaluate an expression of the grid coordinate (and hbar) on the grid."""
        e = as_expr(e)
        extra = free_names(e) - {self.coordinate, "hbar"}
        if extra:
            raise DiscretizationError(f"expression depends on {sorted(extra)} besides {self.coordinate!r}")
        value = evaluate(e, {self.coordinate: self.points}, hbar=self.hbar)
        return np.broadcast_to(np.asarray(value, dtype=complex), (self.n,)).copy()


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: GridSpec | None
    values: np.ndarray

    def __post_init__(self):
        if self.grid is not None and len(self.values) != self.grid.n:
            raise ValueError("grid function length does not match the grid")


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: tuple[float, ...]
    vectors: tuple[GridFunction, ...]
    residuals: tuple[float, ...]


def classical_restriction(a: ClassicalMagnitude, u: VectorField) -> Expr:
    """a(u): substitute v^j -> u^j(x)."""
    check_same_chart(a, u)
    subs = dict(zip(a.chart.velocities, u.components))
    return simplify(a.expr.xreplace(subs))


def schrodinger_operator(g: Metric, U) -> DiffOperator:
    """½ quantize(metric) + U, i.e. -½ hbar² Laplacian + U."""
    kinetic = quantize(SymCoTensor.from_metric(g), g).scale(sympy.Rational(1, 2))
    return kinetic + DiffOperator.multiplication(g.chart, as_expr(U))


def discretize(op: DiffOperator, grid: GridSpec) -> np.ndarray:
    chart = op.chart
    j = chart.index(grid.coordinate)
    if op.order > 2:
        raise DiscretizationError(f"operator order {op.order} > 2")
    c = [np.zeros(grid.n, dtype=complex) for _ in range(3)]
    for alpha, coeff in op.coeffs.items():
        if any(k for i, k in enumerate(alpha) if i != j):
            raise DiscretizationError("operator differentiates along a coordinate other than the grid's")
        try:
            c[alpha[j]] += grid.sample(coeff)
        except EvaluationError as exc:
            raise DiscretizationError(f"coefficient singular on grid: {exc}") from exc
    h = grid.step
    n = grid.n
    lower = c[2] / h**2 - c[1] / (2 * h)
    upper = c[2] / h**2 + c[1] / (2 * h)
    mat = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    mat[idx, idx] = c[0] - 2 * c[2] / h**2
    if grid.boundary == "periodic":
        mat[idx, (idx - 1) % n] += lower
        mat[idx, (idx + 1) % n] += upper
    else:
        mat[idx[1:], idx[:-1]] = lower[1:]
        mat[idx[:-1], idx[1:]] = upper[:-1]
    if not np.any(mat.imag):
        return mat.real.copy()
    return mat


def spectrum(mat: np.ndarray, m: int, grid: GridSpec | None = None) -> SpectrumResult:
    """The m smallest eigenpairs of a symmetric (Hermitian) matrix."""
    mat = np.asarray(mat)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise SpectrumError("matrix must be square")
    if not 1 <= m <= n:
        raise SpectrumError(f"requested {m} eigenpairs from a {n}x{n} matrix")
    asym = np.max(np.abs(mat - mat.conj().T)) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise SpectrumError(f"matrix is not symmetric (max deviation {asym:.3e})")
    vals, vecs = scipy.linalg.eigh(mat, subset_by_index=[0, m - 1])
    out_vecs, residuals = [], []
    for k in range(m):
        psi = vecs[:, k]
        pivot = psi[np.argmax(np.abs(psi))]
        psi = psi * (abs(pivot) / pivot)
        psi = psi / np.linalg.norm(psi)
        res = float(np.linalg.norm(mat @ psi - vals[k] * psi))
        if res > RESIDUAL_TOL:
            raise SpectrumError(f"eigenpair {k} residual {res:.3e} exceeds {RESIDUAL_TOL}")
        out_vecs.append(GridFunction(grid, psi))
        residuals.append(res)
    return SpectrumResult(tuple(float(v) for v in vals), tuple(out_vecs), tuple(residuals))


def wave_residual(op: DiffOperator, a_of_u, psi: GridFunction) -> float:
    """||(op - a(u)) psi|| / ||psi|| on psi's grid."""
    grid = psi.grid
    if grid is None:
        raise ValueError("grid function carries no grid")
    mat = discretize(op, grid)
    try:
        diag = grid.sample(a_of_u)
    except EvaluationError as exc:
        raise DiscretizationError(f"a(u) singular on grid: {exc}") from exc
    values = np.asarray(psi.values)
    return float(np.linalg.norm(mat @ values - diag * values) / np.linalg.norm(values))


def hamilton_jacobi_residual(g: Metric, U, S, E: float, grid: GridSpec) -> float:
    """max over the grid of |½ g^{jk} dS_j dS_k + U - E|."""
    U, S = as_expr(U), as_expr(S)
    n = g.chart.dim
    ginv = inverse_metric(g)
    grad = [differentiate(S, x) for x in g.chart.symbols]
    H = sum(ginv[j][k] * grad[j] * grad[k] for j in range(n) for k in range(n)) / 2 + U - as_expr(E)
    values = grid.sample(H)
    return float(np.max(np.abs(values)))


__all__ = [
    "DiscretizationError",
    "GridFunction",
    "GridSpec",
    "SpectrumError",
    "SpectrumResult",
    "classical_restriction",
    "discretize",
    "hamilton_jacobi_residual",
    "schrodinger_operator",
    "spectrum",
    "wave_residual",
]
