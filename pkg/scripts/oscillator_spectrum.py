"""Finite-difference oscillator levels and their grid convergence.

    python3 scripts/oscillator_spectrum.py --sizes 250 500 1000 2000 4000
"""
import argparse
import time
from dataclasses import dataclass, field

import numpy as np

from rquant import corpus
from rquant.wavelab import GridSpec, discretize, schrodinger_operator, spectrum


@dataclass
class OscillatorConfig:
    half_width: float = 10.0
    sizes: list[int] = field(default_factory=lambda: [250, 500, 1000, 2000])
    levels: int = 5
    potential: str = "x^2/2"


def run(cfg: OscillatorConfig):
    H = schrodinger_operator(corpus.line(), cfg.potential)
    exact = np.arange(cfg.levels) + 0.5
    rows = []
    for n in cfg.sizes:
        grid = GridSpec("x", -cfg.half_width, cfg.half_width, n)
        start = time.perf_counter()
        vals = np.array(spectrum(discretize(H, grid), cfg.levels, grid).eigenvalues)
        rows.append((n, vals, np.abs(vals - exact), time.perf_counter() - start))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000])
    p.add_argument("--levels", type=int, default=5)
    args = p.parse_args()
    rows = run(OscillatorConfig(sizes=args.sizes, levels=args.levels))
    previous = None
    for n, vals, err, seconds in rows:
        ratio = "" if previous is None else f"  ratio={previous / err[0]:.3f}"
        print(f"N={n:5d}  {seconds:6.2f}s  E0 err={err[0]:.3e}  max err={err.max():.3e}{ratio}")
        print("         " + " ".join(f"{v:.6f}" for v in vals))
        previous = err[0]


if __name__ == "__main__":
    main()
