"""Acceptance criteria, one test each, each printing a PASS/FAIL line."""
import itertools
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import sympy

from rquant import corpus
from rquant.corpus import EUCLIDEAN_CHART, POLAR_CHART
from rquant.expmap import evaluate_jet, exp_numeric, geodesic_jet
from rquant.expr import HBAR, simplify
from rquant.geometry import Chart, Metric, SymCoTensor, christoffel, laplace_beltrami
from rquant.operators import DiffOperator, commutator
from rquant.quantizer import (
    FourierFiberSpec,
    bracket_vs_commutator_report,
    fourier_correspondence_check,
    metric_tensor,
    momentum_tensor,
    quantization_defect_square,
    quantize,
)
from rquant.wavelab import GridSpec, discretize, hamilton_jacobi_residual, schrodinger_operator, spectrum, wave_residual

I = sympy.I
r = sympy.Symbol("r")
TESTS = Path(__file__).resolve().parent


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, detail

    return emit


def _slope(g, x0, K, vhat):
    jet = geodesic_jet(g, K)
    scales = [2.0**-k for k in range(3, 8)]
    errors = [np.linalg.norm(evaluate_jet(jet, x0, s * vhat) - exp_numeric(g, x0, s * vhat)) for s in scales]
    return float(np.polyfit(np.log(scales), np.log(errors), 1)[0])


def _oscillator():
    line = corpus.line()
    grid = GridSpec("x", -10.0, 10.0, 2000)
    H = schrodinger_operator(line, "x^2/2")
    return H, grid


def _circle():
    g = Metric(Chart.of(s=(0.0, 6.3)), (("1",),))
    grid = GridSpec("s", 0.0, 2 * math.pi, 256, "periodic")
    return schrodinger_operator(g, 0), grid


def test_criterion_01_laplacian_identity(report):
    failures = [
        name
        for name, g in corpus.corpus().items()
        if not quantize(metric_tensor(g), g).probably_equal(laplace_beltrami(g).scale(-(HBAR**2)))
    ]
    report(1, "quantize(T2) = -hbar^2 Laplace-Beltrami on flat, polar, sphere", not failures, ", ".join(failures))


def test_criterion_02_momentum_rule(report):
    failures = [
        f"{name}:{j}"
        for name, g in corpus.corpus().items()
        for j in range(g.chart.dim)
        if quantize(momentum_tensor(g, j), g) != DiffOperator.partial(g.chart, j, -I * HBAR)
    ]
    report(2, "quantize(g_jl dx^l) == -i hbar d_j structurally", not failures, ", ".join(failures))


def test_criterion_03_jet_fidelity(report):
    structural = True
    for g in corpus.corpus().values():
        jet, gamma, n = geodesic_jet(g, 2), christoffel(g), g.chart.dim
        for j, k, s in itertools.product(range(n), repeat=3):
            structural &= jet.coefficient(j, (k, s)) == simplify(-gamma[j, k, s] / 2)
    slopes = {K: _slope(corpus.polar(), np.array([1.5, 1.0]), K, np.array([0.6, 0.8])) for K in (2, 3, 4)}
    ok = structural and all(slopes[K] >= K + 0.7 for K in slopes)
    detail = "slopes " + ", ".join(f"K={K}: {s:.3f}" for K, s in slopes.items())
    report(3, "order-2 jet = -Gamma/2 structurally; jet-vs-RK4 slope >= K+0.7", ok, detail)


def test_criterion_04_fourier_correspondence(report):
    err = fourier_correspondence_check(FourierFiberSpec(half_width=12.0, points=4096, hbar=1.0), "exp(-v^2/2)")
    report(4, "Fourier correspondence on a Gaussian <= 1e-6", err <= 1e-6, f"error {err:.3e}")


def test_criterion_05_noncommutativity_witness(report):
    g = corpus.polar()
    defect = quantization_defect_square(SymCoTensor.covector(POLAR_CHART, [0, 1]), g)
    target = DiffOperator(POLAR_CHART, {(1, 0): -(HBAR**2) / r**3})
    ok = defect.probably_equal(target) and not defect.probably_zero()
    report(5, "quantize(dphi^2) - quantize(dphi)^2 = -(hbar^2/r^3) d_r, nonzero", ok, repr(defect))


def test_criterion_06_canonical_commutator(report):
    flat = corpus.euclidean()
    canonical = all(
        commutator(
            DiffOperator.multiplication(EUCLIDEAN_CHART, EUCLIDEAN_CHART.symbols[j]),
            quantize(momentum_tensor(flat, k), flat),
        )
        == DiffOperator.multiplication(EUCLIDEAN_CHART, I * HBAR if j == k else 0)
        for j in range(2)
        for k in range(2)
    )
    constants = [SymCoTensor.scalar(EUCLIDEAN_CHART, c) for c in (1, -2)]
    constants += [SymCoTensor.covector(EUCLIDEAN_CHART, c) for c in ([1, 0], [0, 1], [2, -3])]
    flat_zero = all(bracket_vs_commutator_report(a, b, flat).is_zero for a in constants for b in constants)
    polar = corpus.polar()
    witness = bracket_vs_commutator_report(metric_tensor(polar), SymCoTensor.covector(POLAR_CHART, [1, 0]), polar)
    spot = witness.defect.probably_equal(DiffOperator(POLAR_CHART, {(1, 0): -I * HBAR**3 / r**2}))
    ok = canonical and flat_zero and not witness.is_zero and spot
    detail = f"degree-2 witness (T2, dr) on polar: defect {witness.defect!r}"
    report(6, "[x^j, p_k] = i hbar delta; flat degree<=1 defects vanish; polar degree-2 defect nonzero", ok, detail)


def test_criterion_07_oscillator_spectrum(report):
    start = time.perf_counter()
    H, grid = _oscillator()
    vals = np.array(spectrum(discretize(H, grid), 5, grid).eigenvalues)
    elapsed = time.perf_counter() - start
    dev = float(np.max(np.abs(vals - [0.5, 1.5, 2.5, 3.5, 4.5])))
    ok = dev <= 1e-3 and elapsed < 60
    report(7, "oscillator N=2000 lowest five levels within 1e-3, under 60 s", ok, f"max dev {dev:.2e}, {elapsed:.2f} s")


def test_criterion_08_circle_spectrum(report):
    H, grid = _circle()
    vals = np.array(spectrum(discretize(H, grid), 5, grid).eigenvalues)
    dev = float(np.max(np.abs(vals - [0, 0.5, 0.5, 2, 2])))
    pairs = max(abs(vals[1] - vals[2]), abs(vals[3] - vals[4]))
    gaps = min(vals[1] - vals[0], vals[3] - vals[2])
    ok = dev <= 1e-3 and pairs <= 1e-6 and gaps > 0.1
    report(8, "circle N=256 levels within 1e-3 with double degeneracy", ok, f"max dev {dev:.2e}, pair split {pairs:.1e}")


def test_criterion_09_wave_residual(report):
    worst = 0.0
    for H, grid in (_oscillator(), _circle()):
        result = spectrum(discretize(H, grid), 5, grid)
        for E, psi in zip(result.eigenvalues, result.vectors):
            worst = max(worst, wave_residual(H, E, psi))
    report(9, "every returned eigenpair has wave residual <= 1e-8", worst <= 1e-8, f"worst {worst:.2e}")


def test_criterion_10_hamilton_jacobi(report):
    S = "1/2*(x*sqrt(1 - x^2) + asin(x))"
    grid = GridSpec("x", -0.9, 0.9, 1000)
    res = hamilton_jacobi_residual(corpus.line(), "x^2/2", S, 0.5, grid)
    report(10, "oscillator action solves Hamilton-Jacobi to 1e-9 on the interior", res <= 1e-9, f"residual {res:.2e}")


PROPERTY_SUITES = [
    "test_expr.py::test_derivative_matches_central_difference",
    "test_quantizer.py::test_quantize_is_linear_over_functions",
    "test_quantizer.py::test_principal_symbol_preserved",
    "test_quantizer.py::test_flat_metric_degenerates",
    "test_wavelab.py::test_oscillator_convergence_is_second_order",
]


def test_criterion_11_property_suites(report):
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"] + [str(TESTS / s) for s in PROPERTY_SUITES]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=TESTS.parent, env=dict(os.environ), check=False)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    report(11, "property suites green", proc.returncode == 0, summary)
