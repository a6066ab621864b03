"""Self-tuned consensus weights on random geometric graphs vs the exact optimum."""
import argparse

import numpy as np

from symspec.consensus import best_constant_weight, connected_rgg, consensus_run, estimate_weight

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--graphs", type=int, default=20, help="number of connected graphs")
ap.add_argument("--n", type=int, default=50, help="nodes per graph")
ap.add_argument("--radius", type=float, default=0.3, help="connection radius")
args = ap.parse_args()

print("seed  w_tuned   w_exact   rel_err   steps")
seed = 0
for _ in range(args.graphs):
    g, used, _ = connected_rgg(args.n, args.radius, seed)
    seed = used + 1
    lam = np.linalg.eigvalsh(g.to_dense())
    exact = best_constant_weight(lam[-1], lam[1])
    tuned = estimate_weight(g, seed=used)
    res = consensus_run(g, tuned.w, np.random.default_rng(used).random(g.n))
    print(f"{used:4d}  {tuned.w:.6f}  {exact:.6f}  {abs(tuned.w / exact - 1):.1e}  {res.steps}")
