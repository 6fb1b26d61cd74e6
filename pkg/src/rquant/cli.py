"""``rq`` command-line front end.

Exit codes: 0 success, 1 computation error or failed check, 2 manifest error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import sympy

from .expr import HBAR, simplify, to_text
from .expmap import geodesic_jet
from .geometry import christoffel, laplace_beltrami
from .manifest import Manifest, ManifestError, load_manifest
from .operators import DiffOperator, commutator
from .quantizer import (
    bracket_vs_commutator_report,
    fourier_correspondence_check,
    magnitude_of,
    principal_symbol,
    quantization_defect_square,
    quantize,
)
from .wavelab import (
    classical_restriction,
    discretize,
    hamilton_jacobi_residual,
    schrodinger_operator,
    spectrum,
    wave_residual,
)

COMMANDS = (
    "christoffel",
    "expmap",
    "quantize",
    "laplace-check",
    "commutator",
    "defect",
    "poisson",
    "fourier-check",
    "spectrum",
    "wave-check",
    "hj-check",
)


class Report:
    def __init__(self, command: str, inputs: dict):
        self.command = command
        self.inputs = inputs
        self.results: list[dict] = []
        self.checks: list[dict] = []

    def row(self, **fields):
        self.results.append(fields)

    def operator_rows(self, op: DiffOperator, **extra):
        for label, text in op.describe():
            self.row(**extra, derivative=label, coefficient=text)

    def check(self, name: str, passed: bool, value=None, tolerance=None):
        self.checks.append({"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        doc = {"command": self.command, "inputs": self.inputs, "results": self.results, "checks": self.checks}
        return json.dumps(doc, indent=2, sort_keys=False)

    def to_text(self) -> str:
        lines = [f"command: {self.command}"]
        lines += [f"{k}: {v}" for k, v in self.inputs.items() if v is not None]
        lines.append("results:")
        for r in self.results:
            lines.append("  " + "  ".join(f"{k}={_fmt(v)}" for k, v in r.items()))
        if self.checks:
            lines.append("checks:")
            for c in self.checks:
                status = "PASS" if c["passed"] else "FAIL"
                extra = "".join(f" {k}={_fmt(c[k])}" for k in ("value", "tolerance") if c[k] is not None)
                lines.append(f"  {status} {c['name']}{extra}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _clean(x: float) -> float:
    return float(f"{x:.12g}")


def _need_grid(m: Manifest):
    if m.grid is None:
        raise ManifestError("grid", "this command needs a grid section")
    return m.grid


# ---------------------------------------------------------------------------
# commands


def cmd_christoffel(m: Manifest, args, rep: Report):
    gamma = christoffel(m.metric)
    coords = m.chart.coordinates
    for (j, r, s), value in gamma.nonzero():
        rep.row(upper=coords[j], lower=f"{coords[r]},{coords[s]}", value=to_text(value))
    n = m.chart.dim
    symmetric = all(gamma[j, r, s] == gamma[j, s, r] for j in range(n) for r in range(n) for s in range(n))
    rep.check("lower_index_symmetry", symmetric)


def cmd_expmap(m: Manifest, args, rep: Report):
    K = args.order or 2
    jet = geodesic_jet(m.metric, K)
    gamma = christoffel(m.metric)
    n = m.chart.dim
    for c, e in zip(m.chart.coordinates, jet.as_exprs()):
        rep.row(coordinate=c, jet=to_text(e))
    first = all(jet.coefficient(j, (k,)) == (1 if j == k else 0) for j in range(n) for k in range(n))
    second = all(
        jet.coefficient(j, (r, s)) == simplify(-gamma[j, r, s] / 2)
        for j in range(n)
        for r in range(n)
        for s in range(r, n)
    )
    rep.check("degree1_is_velocity", first)
    rep.check("degree2_is_minus_half_christoffel", second)


def cmd_quantize(m: Manifest, args, rep: Report):
    name = args.tensor or "T2"
    a = m.tensor(name)
    q = quantize(a, m.metric)
    rep.operator_rows(q)
    domain = m.chart.probe_domain(seed=args.seed)
    rep.check("principal_symbol", q.part(a.degree).probably_equal(principal_symbol(a, m.metric), domain))
    if a.components == m.tensors["T2"].components and a.degree == 2:
        try:
            target = laplace_beltrami(m.metric).scale(-HBAR**2)
            rep.check("laplacian_identity", q.probably_equal(target, domain), tolerance=1e-9)
        except ValueError:
            pass


def cmd_laplace_check(m: Manifest, args, rep: Report):
    q = quantize(m.tensors["T2"], m.metric)
    lb = laplace_beltrami(m.metric)
    rep.operator_rows(lb, operator="laplace_beltrami")
    rep.operator_rows(q, operator="quantize(T2)")
    domain = m.chart.probe_domain(seed=args.seed)
    target = lb.scale(-HBAR**2)
    labels = sorted(set(q.coeffs) | set(target.coeffs), key=lambda a: (sum(a), a))
    for alpha in labels:
        ok = DiffOperator(m.chart, {alpha: q.coefficient(alpha)}).probably_equal(
            DiffOperator(m.chart, {alpha: target.coefficient(alpha)}), domain
        )
        rep.check(f"coefficient {m.chart.derivative_label(alpha)}", ok, tolerance=1e-9)


def _pair(m: Manifest, args):
    if not args.tensor or not args.tensor2:
        raise ManifestError("", "--tensor and --tensor2 are required")
    return m.tensor(args.tensor), m.tensor(args.tensor2)


def cmd_commutator(m: Manifest, args, rep: Report):
    a, b = _pair(m, args)
    comm = commutator(quantize(a, m.metric), quantize(b, m.metric))
    rep.operator_rows(comm)
    rep.row(order=comm.order)


def cmd_defect(m: Manifest, args, rep: Report):
    a = m.tensor(args.tensor or "T2")
    d = quantization_defect_square(a, m.metric)
    rep.operator_rows(d)
    rep.row(is_zero=d.probably_zero(m.chart.probe_domain(seed=args.seed)), order=d.order)


def cmd_poisson(m: Manifest, args, rep: Report):
    a, b = _pair(m, args)
    report = bracket_vs_commutator_report(a, b, m.metric, seed=args.seed)
    rep.row(bracket=to_text(report.bracket.expr))
    rep.operator_rows(report.defect, part="defect")
    rep.row(
        defect_is_zero=report.is_zero,
        max_coeff_derivative_order=report.max_coeff_derivative_order,
        commutator_order=report.commutator_order,
    )
    bound = a.degree + b.degree - 1
    degrees = report.bracket.degrees
    rep.check("bracket_degree_bound", all(d <= bound for d in degrees), value=max(degrees, default=0), tolerance=bound)


def cmd_fourier_check(m: Manifest, args, rep: Report):
    task = m.fourier
    if task is None:
        raise ManifestError("fourier", "this command needs a fourier section")
    err = fourier_correspondence_check(task.spec, task.f, task.variable)
    rep.row(f=to_text(task.f), half_width=task.spec.half_width, points=task.spec.points, max_relative_error=_clean(err))
    rep.check("fourier_correspondence", err <= task.tolerance, value=_clean(err), tolerance=task.tolerance)


def _schrodinger_spectrum(m: Manifest, count: int):
    grid = _need_grid(m)
    op = schrodinger_operator(m.metric, m.potential)
    return op, grid, spectrum(discretize(op, grid), count, grid)


def cmd_spectrum(m: Manifest, args, rep: Report):
    count = args.m or 5
    _, grid, result = _schrodinger_spectrum(m, count)
    for k, (E, res) in enumerate(zip(result.eigenvalues, result.residuals)):
        rep.row(index=k, energy=_clean(E))
    rep.check("residuals", max(result.residuals) <= 1e-8, value=_clean(max(result.residuals)), tolerance=1e-8)
    if m.expected_eigenvalues:
        expected = m.expected_eigenvalues[:count]
        got = result.eigenvalues[: len(expected)]
        dev = max(abs(a - b) for a, b in zip(got, expected))
        rep.check("expected_eigenvalues", dev <= m.eigenvalue_tolerance, value=_clean(dev), tolerance=m.eigenvalue_tolerance)


def cmd_wave_check(m: Manifest, args, rep: Report):
    count = args.m or 5
    op, grid, result = _schrodinger_spectrum(m, count)
    worst = 0.0
    for k, (E, psi) in enumerate(zip(result.eigenvalues, result.vectors)):
        res = wave_residual(op, E, psi)
        worst = max(worst, res)
        rep.row(index=k, energy=_clean(E), within_tolerance=res <= 1e-8)
    if args.field:
        if args.field not in m.fields:
            raise ManifestError("fields", f"no field named {args.field!r}")
        H = magnitude_of(m.tensors["T2"])
        kinetic = classical_restriction(H, m.fields[args.field]) / 2
        rep.row(field=args.field, classical_energy=to_text(sympy.expand(kinetic + m.potential)))
    rep.check("wave_residual", worst <= 1e-8, value=_clean(worst), tolerance=1e-8)


def cmd_hj_check(m: Manifest, args, rep: Report):
    if not m.actions:
        raise ManifestError("actions", "this command needs an actions section")
    for name, act in m.actions.items():
        res = hamilton_jacobi_residual(m.metric, m.potential, act.S, act.E, act.grid)
        rep.row(action=name, energy=act.E, points=act.grid.n)
        rep.check(f"hamilton_jacobi {name}", res <= act.tolerance, value=_clean(res), tolerance=act.tolerance)


HANDLERS = {
    "christoffel": cmd_christoffel,
    "expmap": cmd_expmap,
    "quantize": cmd_quantize,
    "laplace-check": cmd_laplace_check,
    "commutator": cmd_commutator,
    "defect": cmd_defect,
    "poisson": cmd_poisson,
    "fourier-check": cmd_fourier_check,
    "spectrum": cmd_spectrum,
    "wave-check": cmd_wave_check,
    "hj-check": cmd_hj_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rq", description="Riemannian quantization toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--order", type=int)
    p.add_argument("--tensor")
    p.add_argument("--tensor2")
    p.add_argument("--field")
    p.add_argument("--m", type=int)
    return p


def run_command(cmd: str, manifest_path: str, args: argparse.Namespace) -> tuple[int, Report | None]:
    inputs = {
        "manifest": Path(manifest_path).name,
        "seed": args.seed,
        "order": args.order,
        "tensor": args.tensor,
        "tensor2": args.tensor2,
        "field": args.field,
        "m": args.m,
    }
    rep = Report(cmd, {k: v for k, v in inputs.items() if v is not None})
    try:
        manifest = load_manifest(manifest_path)
        HANDLERS[cmd](manifest, args, rep)
    except ManifestError as exc:
        print(f"rq: manifest error: {exc}", file=sys.stderr)
        return 2, None
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"rq: {cmd} failed: {exc}", file=sys.stderr)
        return 1, None
    return (0 if rep.passed else 1), rep


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, rep = run_command(args.command, args.manifest, args)
    if rep is not None:
        sys.stdout.write(rep.to_json() + "\n" if args.format == "json" else rep.to_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
