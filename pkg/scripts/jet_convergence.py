"""Log-log slope of truncated exponential-map jets against an RK4 reference.

    python3 scripts/jet_convergence.py --metric sphere --orders 2 3 4 5
"""
import argparse
from dataclasses import dataclass, field

import numpy as np

from rquant import corpus
from rquant.expmap import evaluate_jet, exp_numeric, geodesic_jet

BASE_POINTS = {"euclidean": (0.3, -0.2), "polar": (1.5, 1.0), "sphere": (1.2, 1.0)}


@dataclass
class JetConvergenceConfig:
    metric: str = "polar"
    orders: list[int] = field(default_factory=lambda: [2, 3, 4])
    angle: float = 0.927
    scales: list[float] = field(default_factory=lambda: [2.0**-k for k in range(3, 8)])
    rk4_steps: int = 1024


def run(cfg: JetConvergenceConfig):
    g = corpus.corpus()[cfg.metric]
    x0 = np.array(BASE_POINTS[cfg.metric])
    vhat = np.array([np.cos(cfg.angle), np.sin(cfg.angle)])
    rows = []
    for K in cfg.orders:
        jet = geodesic_jet(g, K)
        errors = [
            np.linalg.norm(evaluate_jet(jet, x0, s * vhat) - exp_numeric(g, x0, s * vhat, cfg.rk4_steps))
            for s in cfg.scales
        ]
        slope = float(np.polyfit(np.log(cfg.scales), np.log(errors), 1)[0])
        rows.append((K, errors, slope))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--metric", choices=sorted(BASE_POINTS), default="polar")
    p.add_argument("--orders", type=int, nargs="+", default=[2, 3, 4])
    args = p.parse_args()
    cfg = JetConvergenceConfig(metric=args.metric, orders=args.orders)
    print(f"metric={cfg.metric} base={BASE_POINTS[cfg.metric]} scales={cfg.scales[0]:g}..{cfg.scales[-1]:g}")
    for K, errors, slope in run(cfg):
        errs = " ".join(f"{e:.3e}" for e in errors)
        print(f"K={K}  slope={slope:.3f}  target>={K + 0.7:.1f}  errors: {errs}")


if __name__ == "__main__":
    main()
