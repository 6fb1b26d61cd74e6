"""JSON manifests describing one chart, its metric and the objects living on it.

Example::

    {
      "chart": {"r": [0.5, 3.0], "phi": [0.1, 6.0]},
      "metric": [["1", "0"], ["0", "r^2"]],
      "tensors": {"dphi": {"degree": 1, "components": {"phi": "1"}}},
      "fields": {"u": ["0", "1"]},
      "potential": "0",
      "grid": {"coordinate": "r", "interval": [0.5, 3.0], "n": 200,
               "boundary": "dirichlet", "hbar": 1.0},
      "actions": {"S": {"S": "...", "E": 0.5, "interval": [-0.9, 0.9]}},
      "fourier": {"f": "exp(-v^2/2)", "variable": "v"},
      "expected_eigenvalues": {"values": [0.5, 1.5], "tolerance": 1e-3}
    }

Tensor component keys are comma-separated coordinate names (any order; the
empty string for degree 0). ``T2`` and ``p_<coord>`` are always available as
the metric and the momentum covectors unless the manifest redefines them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import sympy

from .expr import Expr, ParseError, free_names, parse, simplify
from .geometry import Chart, DegenerateMetricError, Metric, SymCoTensor, VectorField
from .quantizer import FourierFiberSpec, metric_tensor, momentum_tensor
from .wavelab import GridSpec


class ManifestError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Action:
    S: Expr
    E: float
    grid: GridSpec
    tolerance: float = 1e-9


@dataclass(frozen=True)
class FourierTask:
    spec: FourierFiberSpec
    f: Expr
    variable: str
    tolerance: float = 1e-6


@dataclass(frozen=True, eq=False)
class Manifest:
    chart: Chart
    metric: Metric
    tensors: dict[str, SymCoTensor]
    fields: dict[str, VectorField] = field(default_factory=dict)
    potential: Expr = sympy.Integer(0)
    grid: GridSpec | None = None
    actions: dict[str, Action] = field(default_factory=dict)
    fourier: FourierTask | None = None
    expected_eigenvalues: tuple[float, ...] = ()
    eigenvalue_tolerance: float = 1e-3

    def tensor(self, name: str) -> SymCoTensor:
        try:
            return self.tensors[name]
        except KeyError:
            raise ManifestError("tensors", f"no tensor named {name!r}") from None


def _expr(text: Any, path: str, allowed: set[str]) -> Expr:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(text)
    if not isinstance(text, str):
        raise ManifestError(path, "expected an expression string")
    try:
        e = parse(text)
    except ParseError as exc:
        raise ManifestError(path, str(exc)) from exc
    unknown = free_names(e) - allowed - {"hbar"}
    if unknown:
        raise ManifestError(path, f"unknown symbol(s) {sorted(unknown)}")
    return e


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(path, "expected a number")
    return float(value)


def _interval(value: Any, path: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ManifestError(path, "expected [lo, hi]")
    lo, hi = _number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]")
    if not lo < hi:
        raise ManifestError(path, "interval is empty")
    return lo, hi


def _object(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ManifestError(path, "expected an object")
    return value


def _grid(raw: dict, path: str, chart: Chart) -> GridSpec:
    raw = _object(raw, path)
    coord = raw.get("coordinate", chart.coordinates[0])
    if coord not in chart.coordinates:
        raise ManifestError(f"{path}.coordinate", f"unknown coordinate {coord!r}")
    lo, hi = _interval(raw.get("interval"), f"{path}.interval")
    n = raw.get("n")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ManifestError(f"{path}.n", "expected an integer")
    try:
        return GridSpec(
            coord,
            lo,
            hi,
            n,
            raw.get("boundary", "dirichlet"),
            _number(raw.get("hbar", 1.0), f"{path}.hbar"),
        )
    except ValueError as exc:
        raise ManifestError(path, str(exc)) from exc


def manifest_from_dict(data: dict) -> Manifest:
    data = _object(data, "")
    raw_chart = _object(data.get("chart"), "chart")
    if not raw_chart:
        raise ManifestError("chart", "at least one coordinate is required")
    intervals = [_interval(v, f"chart.{k}") for k, v in raw_chart.items()]
    try:
        chart = Chart(tuple(raw_chart), tuple(intervals))
    except ValueError as exc:
        raise ManifestError("chart", str(exc)) from exc
    coords = set(chart.coordinates)
    n = chart.dim

    raw_metric = data.get("metric")
    if not isinstance(raw_metric, list) or len(raw_metric) != n:
        raise ManifestError("metric", f"expected a {n}x{n} matrix")
    rows = []
    for i, row in enumerate(raw_metric):
        if not isinstance(row, list) or len(row) != n:
            raise ManifestError(f"metric[{i}]", f"expected {n} entries")
        rows.append([_expr(c, f"metric[{i}][{j}]", coords) for j, c in enumerate(row)])
    for i in range(n):
        for j in range(i + 1, n):
            if simplify(rows[i][j] - rows[j][i]) != 0:
                raise ManifestError(f"metric[{i}][{j}]", f"metric is not symmetric (differs from metric[{j}][{i}])")
    try:
        metric = Metric(chart, tuple(map(tuple, rows)))
    except (DegenerateMetricError, ValueError) as exc:
        raise ManifestError("metric", str(exc)) from exc

    tensors: dict[str, SymCoTensor] = {"T2": metric_tensor(metric)}
    for j, c in enumerate(chart.coordinates):
        tensors[f"p_{c}"] = momentum_tensor(metric, j)
    for name, raw in _object(data.get("tensors", {}), "tensors").items():
        path = f"tensors.{name}"
        raw = _object(raw, path)
        degree = raw.get("degree")
        if not isinstance(degree, int) or isinstance(degree, bool) or degree < 0:
            raise ManifestError(f"{path}.degree", "expected a non-negative integer")
        comps = {}
        for key, text in _object(raw.get("components", {}), f"{path}.components").items():
            cpath = f"{path}.components[{key!r}]"
            names = [s.strip() for s in key.split(",")] if key.strip() else []
            if len(names) != degree:
                raise ManifestError(cpath, f"expected {degree} indices")
            for s in names:
                if s not in coords:
                    raise ManifestError(cpath, f"unknown coordinate {s!r}")
            idx = tuple(sorted(chart.index(s) for s in names))
            if idx in comps:
                raise ManifestError(cpath, "duplicate component")
            comps[idx] = _expr(text, cpath, coords)
        tensors[name] = SymCoTensor(chart, degree, comps)

    fields = {}
    for name, raw in _object(data.get("fields", {}), "fields").items():
        path = f"fields.{name}"
        if not isinstance(raw, list) or len(raw) != n:
            raise ManifestError(path, f"expected {n} components")
        fields[name] = VectorField(chart, tuple(_expr(c, f"{path}[{k}]", coords) for k, c in enumerate(raw)))

    potential = _expr(data.get("potential", "0"), "potential", coords)
    grid = _grid(data["grid"], "grid", chart) if "grid" in data else None

    actions = {}
    for name, raw in _object(data.get("actions", {}), "actions").items():
        path = f"actions.{name}"
        raw = _object(raw, path)
        S = _expr(raw.get("S"), f"{path}.S", coords)
        E = _number(raw.get("E"), f"{path}.E")
        if "interval" in raw:
            base = grid or GridSpec(chart.coordinates[0], 0.0, 1.0, 16)
            lo, hi = _interval(raw["interval"], f"{path}.interval")
            sub = GridSpec(base.coordinate, lo, hi, int(raw.get("n", 199)), "dirichlet", base.hbar)
        elif grid is not None:
            sub = grid
        else:
            raise ManifestError(path, "needs an interval or a manifest grid")
        actions[name] = Action(S, E, sub, _number(raw.get("tolerance", 1e-9), f"{path}.tolerance"))

    fourier = None
    if "fourier" in data:
        raw = _object(data["fourier"], "fourier")
        var = raw.get("variable", "v")
        f = _expr(raw.get("f", f"exp(-{var}^2/2)"), "fourier.f", {var})
        try:
            spec = FourierFiberSpec(
                half_width=_number(raw.get("half_width", 12.0), "fourier.half_width"),
                points=int(raw.get("points", 4096)),
                hbar=_number(raw.get("hbar", 1.0), "fourier.hbar"),
            )
        except ValueError as exc:
            raise ManifestError("fourier", str(exc)) from exc
        fourier = FourierTask(spec, f, var, _number(raw.get("tolerance", 1e-6), "fourier.tolerance"))

    expected, tol = (), 1e-3
    if "expected_eigenvalues" in data:
        raw = _object(data["expected_eigenvalues"], "expected_eigenvalues")
        values = raw.get("values")
        if not isinstance(values, list):
            raise ManifestError("expected_eigenvalues.values", "expected a list of numbers")
        expected = tuple(_number(v, f"expected_eigenvalues.values[{k}]") for k, v in enumerate(values))
        tol = _number(raw.get("tolerance", 1e-3), "expected_eigenvalues.tolerance")

    return Manifest(chart, metric, tensors, fields, potential, grid, actions, fourier, expected, tol)


def load_manifest(path: str | Path) -> Manifest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError("", f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return manifest_from_dict(data)
