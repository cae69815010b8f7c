#!/usr/bin/env python3
"""Regenerate the precomputed generalized-moment coefficient assets.

Each asset is a fitted coefficient set for one (kernel order, index radius)
configuration used by the bundled scenarios and tests.
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from algshape.bspline import BSplineKernel
from algshape.gmfit import build_gm_objective, solve_gm

MAX_ORDER = 6
CONFIGS = [
    (6, 13),
    (4, 14),
    (2, 20),
    (2, 16),
    (2, 14),
    (2, 7),
]


def main() -> None:
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "src" / "algshape" / "assets"
    out_dir.mkdir(exist_ok=True)
    for m, K in CONFIGS:
        t0 = time.time()
        problem = build_gm_objective(BSplineKernel(m), MAX_ORDER, K)
        coefs = solve_gm(problem)
        path = out_dir / f"gm_m{m}_P{MAX_ORDER}_K{K}.json"
        coefs.save(path)
        print(f"{path.name}: objective {coefs.objective:.3e} ({time.time() - t0:.1f} s)")


if __name__ == "__main__":
    main()
