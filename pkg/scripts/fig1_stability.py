"""Norm growth of Euler vs second-order splitting on Les Miserables.

Writes step,euler,si2 norm ratios as CSV (stdout or the first argument).
"""
import math
import sys

import numpy as np

from symspec.datasets import lesmis
from symspec.integrators import RunConfig, run

g = lesmis()
cfg = RunConfig("si2", math.pi / 72, 256)
si2 = run(g, cfg)
with np.errstate(over="ignore"):
    euler = run(g, cfg.with_(scheme="euler"))
out = open(sys.argv[1], "w") if len(sys.argv) > 1 else sys.stdout
out.write("step,euler,si2\n")
for k, (a, b) in enumerate(zip(euler.norm_ratio, si2.norm_ratio)):
    out.write(f"{k},{a:.6e},{b:.12f}\n")
print(f"euler max {euler.max_norm_ratio:.3g}, si2 max {si2.max_norm_ratio:.6f}", file=sys.stderr)
