"""How many of the k smallest Les Miserables eigenvalues each scheme recovers."""
import argparse
import math

import numpy as np

from symspec.cli import match_count
from symspec.datasets import lesmis
from symspec.integrators import RunConfig
from symspec.spectral import run_pipeline

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--samples", type=int, default=65536, help="samples per run")
ap.add_argument("--seed", type=int, default=0, help="initial-state seed")
args = ap.parse_args()

g = lesmis()
lam = np.linalg.eigvalsh(g.to_dense())
runs = {"leapfrog2": args.samples, "si2": args.samples, "si4": args.samples // 4}
print("scheme     samples  " + "  ".join(f"k={k:<3d}" for k in (5, 10, 20, 60)))
for scheme, s in runs.items():
    res = run_pipeline(g, RunConfig(scheme, math.pi / 72, s, seed=args.seed, threshold=1e-3))
    tol = res.spectrum.spacing / 2
    counts = [match_count(res.values, lam, tol, k) for k in (5, 10, 20, 60)]
    print(f"{scheme:<10s} {s:7d}  " + "  ".join(f"{c:<5d}" for c in counts))
