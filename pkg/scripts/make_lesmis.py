"""Write the bundled Les Miserables co-appearance edge list.

Source: the copy of Knuth's data distributed with networkx.  Weights are dropped.
"""
import sys
from pathlib import Path

import networkx as nx

out = Path(sys.argv[1] if len(sys.argv) > 1 else "src/symspec/data/lesmis.txt")
G = nx.les_miserables_graph()
names = list(G.nodes())
order = {name: k for k, name in enumerate(names)}
edges = sorted(tuple(sorted((order[u], order[v]))) for u, v in G.edges())
header = [
    "# Les Miserables character co-appearance network (D. E. Knuth), unweighted",
    f"# nodes {G.number_of_nodes()} edges {G.number_of_edges()}",
]
out.write_text("\n".join(header + [f"{names[u]} {names[v]}" for u, v in edges]) + "\n")
print(f"wrote {out}: {len(edges)} edges")
