import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from rquant import corpus
from rquant.corpus import EUCLIDEAN_CHART, LINE_CHART, POLAR_CHART, SPHERE_CHART
from rquant.expmap import exp_numeric
from rquant.expr import HBAR, evaluate, parse, probably_equal
from rquant.geometry import SymCoTensor, christoffel, index_tuples, inverse_metric, laplace_beltrami, raise_indices
from rquant.operators import ChartMismatchError, DiffOperator, commutator, compose, derivative
from rquant.quantizer import (
    ClassicalMagnitude,
    DegreeError,
    FourierFiberSpec,
    NonDecayingError,
    bracket_vs_commutator_report,
    fourier_correspondence_check,
    generic_coefficients,
    magnitude_of,
    max_derivative_order,
    metric_tensor,
    momentum_tensor,
    poisson_bracket,
    principal_symbol,
    quantization_defect_square,
    quantize,
    tensor_of,
    vertical_operator,
)
from strategies import coefficient_exprs, tensors

r, phi, x, y = sympy.symbols("r phi x y")
I = sympy.I


def dphi():
    return SymCoTensor.covector(POLAR_CHART, [0, 1])


def dr():
    return SymCoTensor.covector(POLAR_CHART, [1, 0])


# magnitudes -------------------------------------------------------------


def test_magnitude_examples(polar):
    v_r, v_phi = POLAR_CHART.velocities
    assert magnitude_of(dphi()).expr == v_phi
    assert magnitude_of(metric_tensor(polar)).expr == v_r**2 + r**2 * v_phi**2
    assert magnitude_of(SymCoTensor.scalar(POLAR_CHART, "r^2")).expr == r**2


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_tensor_magnitude_round_trip(degree):
    @given(tensors(POLAR_CHART, degree))
    def check(a):
        back = tensor_of(magnitude_of(a), degree)
        for idx in index_tuples(2, degree):
            assert sympy.simplify(back.component(idx) - a.component(idx)) == 0

    check()


def test_tensor_of_rejects_mixed_degrees():
    v_r, _ = POLAR_CHART.velocities
    with pytest.raises(DegreeError):
        tensor_of(ClassicalMagnitude(POLAR_CHART, v_r + v_r**2))


# vertical operators -----------------------------------------------------


def test_vertical_operator_examples(metric):
    n = metric.chart.dim
    for j in range(n):
        vert = vertical_operator(momentum_tensor(metric, j), metric)
        assert vert.factor == -I * HBAR
        assert {k: sympy.simplify(c) for k, c in vert.coeffs.items()} == {(j,): 1}
    vert = vertical_operator(metric_tensor(metric), metric)
    assert vert.factor == -(HBAR**2)
    ginv = inverse_metric(metric)
    for i, k in index_tuples(n, 2):
        assert vert.coeffs.get((i, k), 0) == ginv[i][k]


def test_vertical_operator_chart_mismatch(polar):
    with pytest.raises(ChartMismatchError):
        vertical_operator(SymCoTensor.covector(SPHERE_CHART, [1, 0]), polar)


# quantize ---------------------------------------------------------------


def test_quantize_momentum_is_minus_i_hbar_partial(metric):
    for j in range(metric.chart.dim):
        assert quantize(momentum_tensor(metric, j), metric) == DiffOperator.partial(metric.chart, j, -I * HBAR)


def test_quantize_scalar_is_multiplication(polar):
    U = parse("r^2*sin(phi)")
    assert quantize(SymCoTensor.scalar(POLAR_CHART, U), polar) == DiffOperator.multiplication(POLAR_CHART, U)


def test_quantize_kinetic_tensor_on_polar(polar):
    expected = DiffOperator(POLAR_CHART, {(2, 0): -(HBAR**2), (1, 0): -(HBAR**2) / r, (0, 2): -(HBAR**2) / r**2})
    assert quantize(metric_tensor(polar), polar).probably_equal(expected)


def test_quantize_dphi_squared(polar):
    expected = DiffOperator(POLAR_CHART, {(0, 2): -(HBAR**2) / r**4, (1, 0): -(HBAR**2) / r**3})
    assert quantize(dphi() * dphi(), polar).probably_equal(expected)


def test_quantize_degree_cap(euclidean):
    a = SymCoTensor.from_indices(EUCLIDEAN_CHART, 7, {(0,) * 7: 1})
    with pytest.raises(DegreeError):
        quantize(a, euclidean)


def test_kinetic_quantization_is_laplacian(metric):
    lhs = quantize(metric_tensor(metric), metric)
    assert lhs.probably_equal(laplace_beltrami(metric).scale(-(HBAR**2)))


def test_first_order_has_no_zeroth_order_term(metric):
    a = SymCoTensor.covector(metric.chart, [metric.chart.symbols[0], 1])
    q = quantize(a, metric)
    assert q.order == 1 and q.part(0).is_zero


def test_second_order_formula(polar):
    a = SymCoTensor(POLAR_CHART, 2, {(0, 0): "phi", (0, 1): "r", (1, 1): "1"})
    raised = raise_indices(a, polar)
    gamma = christoffel(polar)
    f = parse("sin(r)*cos(phi) + r^3*phi")
    total = 0
    for (k, l) in index_tuples(2, 2):
        weight = 1 if k == l else 2
        c = raised.get((k, l), 0)
        alpha = [0, 0]
        alpha[k] += 1
        alpha[l] += 1
        term = derivative(f, POLAR_CHART.symbols, tuple(alpha))
        for j in range(2):
            term -= gamma[j, k, l] * derivative(f, POLAR_CHART.symbols, tuple(1 if i == j else 0 for i in range(2)))
        total += weight * c * term
    assert probably_equal(quantize(a, polar).apply(f), -(HBAR**2) * total, POLAR_CHART.probe_domain())


# independent numerical oracle ------------------------------------------


def _fiber_derivative(F, n, indices, h):
    """Mixed central difference of F(v) at v = 0 along the given axes."""
    total = 0.0
    for signs in itertools.product((1, -1), repeat=len(indices)):
        v = np.zeros(n)
        for s, k in zip(signs, indices):
            v[k] += s * h
        total += np.prod(signs) * F(v)
    return total / (2 * h) ** len(indices)


@pytest.mark.parametrize(
    "comps",
    [
        {(0, 0): "1 + phi", (0, 1): "r", (1, 1): "2"},
        {(0, 0, 1): "r", (1, 1, 1): "1", (0, 0, 0): "phi"},
    ],
    ids=["degree2", "degree3"],
)
def test_quantize_against_rk4_oracle(polar, comps):
    m = len(next(iter(comps)))
    a = SymCoTensor(POLAR_CHART, m, comps)
    f = parse("sin(r)*cos(phi) + r^2")
    x0 = np.array([1.3, 0.9])
    point = {"r": x0[0], "phi": x0[1]}

    def F(v):
        end = exp_numeric(polar, x0, v)
        return np.sin(end[0]) * np.cos(end[1]) + end[0] ** 2

    raised = raise_indices(a, polar)
    h = 1e-3 if m == 2 else 1e-2
    oracle = 0.0
    for ordered in itertools.product(range(2), repeat=m):
        c = complex(evaluate(raised.get(tuple(sorted(ordered)), 0), point))
        if c:
            oracle += c * _fiber_derivative(F, 2, ordered, h)
    oracle *= (-1j) ** m
    got = complex(evaluate(quantize(a, polar).apply(f), point))
    assert abs(got - oracle) <= 1e-4 * max(1.0, abs(oracle))


# properties -------------------------------------------------------------


@pytest.mark.parametrize("degree", [1, 2])
def test_quantize_is_linear_over_functions(polar, degree):
    @given(coefficient_exprs(POLAR_CHART), tensors(POLAR_CHART, degree), tensors(POLAR_CHART, degree))
    def check(h, a, b):
        lhs = quantize(a.scale(h) + b, polar)
        rhs = quantize(a, polar).scale(h) + quantize(b, polar)
        assert lhs.probably_equal(rhs)

    check()


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_flat_metric_degenerates(euclidean, degree):
    @given(tensors(EUCLIDEAN_CHART, degree))
    def check(a):
        assert quantize(a, euclidean) == principal_symbol(a, euclidean)

    check()


@pytest.mark.parametrize("chart_name", ["polar", "sphere"])
@pytest.mark.parametrize("degree", [1, 2, 3])
def test_principal_symbol_preserved(chart_name, degree, request):
    g = request.getfixturevalue(chart_name)

    @settings(max_examples=15 if degree == 3 else 40)
    @given(tensors(g.chart, degree))
    def check(a):
        q = quantize(a, g)
        assert q.order <= degree
        assert q.part(degree).probably_equal(principal_symbol(a, g))

    check()


def test_injective_on_basis_tensors(metric):
    n = metric.chart.dim
    for degree in (0, 1, 2):
        for idx in index_tuples(n, degree):
            a = SymCoTensor(metric.chart, degree, {idx: 1})
            q = quantize(a, metric)
            assert not q.part(degree).probably_zero()


# composition and commutators -------------------------------------------


def test_compose_examples(euclidean):
    dx = DiffOperator.partial(EUCLIDEAN_CHART, 0)
    xs = DiffOperator.multiplication(EUCLIDEAN_CHART, x)
    assert compose(dx, xs) == DiffOperator(EUCLIDEAN_CHART, {(1, 0): x, (0, 0): 1})
    assert compose(DiffOperator.identity(EUCLIDEAN_CHART), dx) == dx
    p = DiffOperator.partial(POLAR_CHART, 1, -I * HBAR / r**2)
    assert compose(p, p) == DiffOperator(POLAR_CHART, {(0, 2): -(HBAR**2) / r**4})


def test_commutator_examples(euclidean):
    for j in range(2):
        xj = DiffOperator.multiplication(EUCLIDEAN_CHART, EUCLIDEAN_CHART.symbols[j])
        for k in range(2):
            pk = quantize(momentum_tensor(euclidean, k), euclidean)
            expected = DiffOperator.multiplication(EUCLIDEAN_CHART, I * HBAR if j == k else 0)
            assert commutator(xj, pk) == expected
    p0, p1 = (quantize(momentum_tensor(euclidean, k), euclidean) for k in range(2))
    assert commutator(p0, p1).is_zero
    assert commutator(p0, p0).is_zero


def test_compose_chart_mismatch():
    with pytest.raises(ChartMismatchError):
        compose(DiffOperator.identity(POLAR_CHART), DiffOperator.identity(SPHERE_CHART))


def test_compose_order_bound(polar):
    a = quantize(metric_tensor(polar), polar)
    b = quantize(dr(), polar)
    assert compose(a, b).order <= a.order + b.order


# Poisson bracket --------------------------------------------------------


def test_poisson_position_momentum(euclidean):
    for j in range(2):
        for k in range(2):
            xj = magnitude_of(SymCoTensor.scalar(EUCLIDEAN_CHART, EUCLIDEAN_CHART.symbols[j]))
            pk = magnitude_of(momentum_tensor(euclidean, k))
            # sign fixed by the convention dF/dp dG/dx - dF/dx dG/dp
            assert poisson_bracket(xj, pk, euclidean).expr == (-1 if j == k else 0)


def test_poisson_kinetic_potential_on_line(line):
    (vx,) = LINE_CHART.velocities
    two_t = magnitude_of(metric_tensor(line))
    U = magnitude_of(SymCoTensor.scalar(LINE_CHART, "sin(x) + x^3"))
    expected = 2 * vx * (sympy.cos(x) + 3 * x**2)
    assert sympy.expand(poisson_bracket(two_t, U, line).expr - expected) == 0


def test_poisson_antisymmetric(polar):
    a = magnitude_of(SymCoTensor(POLAR_CHART, 2, {(0, 1): "r*phi", (1, 1): "sin(r)"}))
    b = magnitude_of(SymCoTensor.covector(POLAR_CHART, ["phi", "r^2"]))
    assert poisson_bracket(a, a, polar).expr == 0
    ab, ba = poisson_bracket(a, b, polar).expr, poisson_bracket(b, a, polar).expr
    assert sympy.expand(ab + ba) == 0


@pytest.mark.parametrize("da, db", [(0, 1), (1, 1), (1, 2), (2, 2)])
def test_poisson_degree_and_derivative_bound(polar, da, db):
    @settings(max_examples=10)
    @given(tensors(POLAR_CHART, da), tensors(POLAR_CHART, db))
    def check(a, b):
        ga, fa = generic_coefficients(a, "A")
        gb, fb = generic_coefficients(b, "B")
        bracket = poisson_bracket(magnitude_of(ga), magnitude_of(gb), polar)
        assert all(d <= da + db - 1 for d in bracket.degrees)
        assert max_derivative_order(bracket.expr, fa | fb) <= 1

    check()


# defects ----------------------------------------------------------------


def test_defect_square_flat_vanishes(euclidean):
    assert quantization_defect_square(SymCoTensor.covector(EUCLIDEAN_CHART, [1, 0]), euclidean).is_zero


def test_defect_square_dphi(polar):
    defect = quantization_defect_square(dphi(), polar)
    assert not defect.probably_zero()
    assert defect.probably_equal(DiffOperator(POLAR_CHART, {(1, 0): -(HBAR**2) / r**3}))
    assert defect.order == 1


def test_defect_square_degree_cap(euclidean):
    a = SymCoTensor.from_indices(EUCLIDEAN_CHART, 4, {(0,) * 4: 1})
    with pytest.raises(DegreeError):
        quantization_defect_square(a, euclidean)


def test_bracket_report_canonical_pair(euclidean):
    report = bracket_vs_commutator_report(
        SymCoTensor.scalar(EUCLIDEAN_CHART, x), momentum_tensor(euclidean, 0), euclidean
    )
    assert report.is_zero and report.defect.is_zero


@given(
    st.integers(0, 1),
    st.integers(0, 1),
    st.lists(st.integers(-3, 3), min_size=4, max_size=4),
)
def test_bracket_report_flat_constant_pairs(da, db, cs):
    g = corpus.euclidean()

    def make(degree, c):
        return SymCoTensor.scalar(EUCLIDEAN_CHART, c[0]) if degree == 0 else SymCoTensor.covector(EUCLIDEAN_CHART, c)

    report = bracket_vs_commutator_report(make(da, cs[:2]), make(db, cs[2:]), g)
    assert report.is_zero


def test_bracket_report_same_tensor(polar):
    a = SymCoTensor(POLAR_CHART, 2, {(0, 0): "1", (1, 1): "r"})
    assert bracket_vs_commutator_report(a, a, polar).is_zero


def test_bracket_report_degree_two_witness(polar):
    report = bracket_vs_commutator_report(metric_tensor(polar), dr(), polar)
    assert not report.is_zero
    # by hand: the only surviving term is -i hbar^3 / r^2 d_r
    assert report.defect.probably_equal(DiffOperator(POLAR_CHART, {(1, 0): -I * HBAR**3 / r**2}))
    # the defect comes from the metric alone, not from derivatives of a or b
    assert report.max_coeff_derivative_order == 0
    assert report.commutator_order == 2


def test_bracket_report_measures_coefficient_derivatives(polar):
    a = SymCoTensor.covector(POLAR_CHART, ["r*phi", "sin(r)"])
    b = SymCoTensor(POLAR_CHART, 2, {(0, 0): "phi", (1, 1): "r"})
    report = bracket_vs_commutator_report(a, b, polar)
    assert not report.is_zero
    assert report.max_coeff_derivative_order == 2


def test_max_derivative_order_scan():
    f = sympy.Function("f")
    e = sympy.diff(f(x, y), x, 2, y) + sympy.diff(f(x, y), x)
    assert max_derivative_order(e) == 3
    assert max_derivative_order(sympy.sin(x)) == 0


# Fourier ----------------------------------------------------------------


def test_fourier_spec_validation():
    with pytest.raises(ValueError):
        FourierFiberSpec(points=1000)
    with pytest.raises(ValueError):
        FourierFiberSpec(points=128)
    with pytest.raises(ValueError):
        FourierFiberSpec(half_width=0)


def test_fourier_transform_of_gaussian_matches_closed_form():
    spec = FourierFiberSpec()
    p = np.linspace(-4, 4, 41)
    v = spec.velocity_grid
    got = spec.transform(np.exp(-(v**2) / 2), p)
    np.testing.assert_allclose(got, np.sqrt(2 * np.pi) * np.exp(-(p**2) / 2), atol=1e-12)


def test_fourier_zero_function():
    assert fourier_correspondence_check(FourierFiberSpec(), 0) == 0.0


def test_fourier_non_decaying_rejected():
    with pytest.raises(NonDecayingError):
        fourier_correspondence_check(FourierFiberSpec(), "exp(-v^2/100)")


@pytest.mark.parametrize("f", ["exp(-v^2/2)", "exp(-(v - 1)^2/2)"])
def test_fourier_correspondence(f):
    assert fourier_correspondence_check(FourierFiberSpec(), f) <= 1e-6


def test_fourier_check_is_normalization_independent():
    a = fourier_correspondence_check(FourierFiberSpec(p_max=1.0), "exp(-v^2/2)")
    b = fourier_correspondence_check(FourierFiberSpec(p_max=1.0, normalization=3.7), "exp(-v^2/2)")
    assert abs(a - b) <= 1e-12
