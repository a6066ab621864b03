"""Regenerate src/symspec/data/coefficients.json.

Each entry is an r-stage kick/drift table (p_j, q_j) for
    y <- y + p_j eps L x ;  x <- x - q_j eps L y
Symmetric compositions of the Strang step S(w) = K(w/2) D(w) K(w/2) are
flattened by merging adjacent half kicks; the trailing stage has q = 0.
"""
import json
import sys
from pathlib import Path


def flatten(weights):
    p, q = [], []
    prev = 0.0
    for w in weights:
        p.append((prev + w) / 2)
        q.append(w)
        prev = w
    p.append(prev / 2)
    q.append(0.0)
    return p, q


c = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
w = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))

tables = {
    "symplectic_euler": {"order": 1, "p": [1.0], "q": [1.0],
                         "note": "single kick-drift stage"},
    "strang": {"order": 2, **dict(zip("pq", flatten([1.0]))),
               "note": "half kick, drift, half kick"},
    "forest_ruth": {"order": 4, **dict(zip("pq", flatten([c, 1 - 2 * c, c]))),
                    "note": "Forest-Ruth / Yoshida triple jump of Strang steps"},
    "suzuki": {"order": 4, **dict(zip("pq", flatten([w, w, 1 - 4 * w, w, w]))),
               "note": "Suzuki five-step fractal composition of Strang steps"},
}
doc = {"version": 1, "default_order4": "suzuki", "tables": tables}
out = Path(sys.argv[1] if len(sys.argv) > 1 else "src/symspec/data/coefficients.json")
out.write_text(json.dumps(doc, indent=2) + "\n")
for name, t in tables.items():
    print(name, len(t["p"]), sum(t["p"]), sum(t["q"]))
