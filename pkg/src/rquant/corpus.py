"""The metrics used throughout the tests, scripts and manifests."""
from __future__ import annotations

from .geometry import Chart, Metric

EUCLIDEAN_CHART = Chart.of(x=(-4.0, 4.0), y=(-4.0, 4.0))
POLAR_CHART = Chart.of(r=(0.5, 3.0), phi=(0.1, 6.0))
SPHERE_CHART = Chart.of(th=(0.3, 2.8), phi=(0.1, 6.0))
LINE_CHART = Chart.of(x=(-10.0, 10.0))


def euclidean() -> Metric:
    return Metric(EUCLIDEAN_CHART, (("1", "0"), ("0", "1")))


def polar() -> Metric:
    return Metric(POLAR_CHART, (("1", "0"), ("0", "r^2")))


def sphere() -> Metric:
    return Metric(SPHERE_CHART, (("1", "0"), ("0", "sin(th)^2")))


def line() -> Metric:
    return Metric(LINE_CHART, (("1",),))


def corpus() -> dict[str, Metric]:
    return {"euclidean": euclidean(), "polar": polar(), "sphere": sphere()}
