"""Undirected graphs in compressed adjacency form and matrix-free graph operators.

Every matrix the rest of the package needs (the Laplacian ``L = D - A`` and the
adjacency ``A``) is applied through :func:`matvec`, which never materialises a
dense matrix.  Row sums accumulate neighbours in ascending index order so that a
centralised run and the message-passing simulator produce identical bits.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)


class MatrixKind(str, enum.Enum):
    LAPLACIAN = "laplacian"
    ADJACENCY = "adjacency"


class GraphParseError(ValueError):
    """Raised for malformed edge-list or GML input."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph.

    ``indptr``/``indices`` follow the CSR convention: the neighbours of node ``u``
    are ``indices[indptr[u]:indptr[u + 1]]``, sorted ascending.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: tuple[str, ...] | None = None
    index_map: np.ndarray | None = None  # original node index per node, set by subgraph ops
    _adj: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        n = len(indptr) - 1
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels must have one entry per node")
        data = np.ones(len(indices), dtype=np.float64)
        adj = sp.csr_matrix((data, indices, indptr), shape=(n, n))
        object.__setattr__(self, "_adj", adj)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        labels: Sequence[str] | None = None,
    ) -> "Graph":
        """Build a graph on nodes ``0..n-1``; self-loops and duplicates are dropped."""
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("edge endpoint out of range")
        arr = arr[arr[:, 0] != arr[:, 1]]
        both = np.concatenate([arr, arr[:, ::-1]])
        both = np.unique(both, axis=0)  # lexicographic: rows then ascending neighbours
        counts = np.bincount(both[:, 0], minlength=n) if len(both) else np.zeros(n, np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        indices = both[:, 1] if len(both) else np.zeros(0, np.int64)
        return cls(indptr, indices, tuple(labels) if labels is not None else None)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        mask = rows < self.indices
        return np.column_stack([rows[mask], self.indices[mask]])

    def node_index(self, node: int | str) -> int:
        """Resolve a node label (preferred) or an integer index."""
        if self.labels is not None and str(node) in self.labels:
            return self.labels.index(str(node))
        try:
            idx = int(node)
        except (TypeError, ValueError):
            raise KeyError(f"unknown node {node!r}") from None
        if not 0 <= idx < self.n:
            raise KeyError(f"node index {idx} out of range 0..{self.n - 1}")
        return idx

    def label(self, u: int) -> str:
        return self.labels[u] if self.labels is not None else str(u)

    def adjacency(self) -> sp.csr_matrix:
        return self._adj

    def to_dense(self, kind: MatrixKind = MatrixKind.LAPLACIAN) -> np.ndarray:
        """Dense matrix, for oracles on small graphs only."""
        a = self._adj.toarray()
        if MatrixKind(kind) is MatrixKind.ADJACENCY:
            return a
        return np.diag(self.degrees.astype(np.float64)) - a

    def operator(self, kind: MatrixKind = MatrixKind.LAPLACIAN):
        """Return ``x -> M x`` bound to this graph."""
        kind = MatrixKind(kind)
        adj = self._adj
        if kind is MatrixKind.ADJACENCY:
            return adj.dot
        deg = self.degrees.astype(np.float64)

        def apply(x):
            return deg * x - adj.dot(x)

        return apply


def matvec(g: Graph, kind: MatrixKind | str, x) -> np.ndarray:
    """Apply the Laplacian or adjacency matrix of ``g`` to ``x``.

    ``(L x)_u = deg(u) x_u - sum_{v in N(u)} x_v``; the neighbour sum runs over
    ascending ``v`` (scipy's CSR kernel walks each row in storage order).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError(f"expected vector of length {g.n}, got shape {x.shape}")
    return g.operator(kind)(x)


def max_degree(g: Graph) -> int:
    if g.n == 0:
        raise ValueError("empty graph")
    return int(g.degrees.max())


def lambda_max_bound(g: Graph, kind: MatrixKind | str = MatrixKind.LAPLACIAN) -> float:
    """Upper bound on the spectral radius: ``2 Delta`` for L, ``Delta`` for A."""
    delta = max_degree(g)
    return float(2 * delta if MatrixKind(kind) is MatrixKind.LAPLACIAN else delta)


def load_edge_list(source: TextIO | str, dedupe: bool = True) -> Graph:
    """Parse a whitespace-separated edge list.

    Node identifiers are arbitrary tokens; internal indices follow order of first
    appearance.  Lines starting with ``#`` or ``%`` are comments.  Extra columns
    (e.g. weights) are ignored.  With ``dedupe=False`` a repeated edge is an error.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return load_edge_list(fh, dedupe=dedupe)

    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    loops = 0
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise GraphParseError(f"line {lineno}: expected two node identifiers, got {line!r}")
        u, v = (index.setdefault(t, len(index)) for t in tokens[:2])
        if u == v:
            loops += 1
            continue
        edges.append((u, v))

    if not index:
        raise GraphParseError("edge list contains no nodes")
    if loops:
        log.warning("dropped %d self-loop line(s)", loops)
    labels = tuple(index)
    g = Graph.from_edges(len(index), edges, labels)
    dupes = len(edges) - g.m
    if dupes:
        if not dedupe:
            raise GraphParseError(f"{dupes} duplicate edge line(s) with dedupe disabled")
        log.info("collapsed %d duplicate/reversed edge line(s)", dupes)
    object.__setattr__(g, "_load_report", {"self_loops": loops, "duplicates": dupes})
    return g


def load_report(g: Graph) -> dict:
    """Counts of dropped self-loops and collapsed duplicates from the last load."""
    return dict(getattr(g, "_load_report", {"self_loops": 0, "duplicates": 0}))


def load_gml(source: TextIO | str) -> Graph:
    """Read the node/edge subset of GML used by the classic network datasets.

    Only ``node [ id .. label ".." ]`` and ``edge [ source .. target .. ]`` blocks are
    interpreted; everything else is skipped.  Node order follows the file.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8", errors="replace") as fh:
            return load_gml(fh)

    tokens = _gml_tokens(source.read())
    nodes: dict[str, str] = {}
    raw_edges: list[tuple[str, str]] = []
    depth = 0
    block: str | None = None
    attrs: dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "[":
            depth += 1
            i += 1
            continue
        if tok == "]":
            if block is not None and depth == 2:
                if block == "node":
                    if "id" not in attrs:
                        raise GraphParseError("GML node without id")
                    nodes[attrs["id"]] = attrs.get("label", attrs["id"])
                else:
                    if "source" not in attrs or "target" not in attrs:
                        raise GraphParseError("GML edge without source/target")
                    raw_edges.append((attrs["source"], attrs["target"]))
                block = None
            depth -= 1
            i += 1
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if depth == 1 and tok in ("node", "edge") and nxt == "[":
            block, attrs = tok, {}
            i += 1
            continue
        if nxt == "[":
            i += 1
            continue
        if block is not None and depth == 2 and nxt is not None:
            attrs.setdefault(tok, nxt)
        i += 2 if nxt is not None else 1

    if not nodes:
        raise GraphParseError("GML contains no nodes")
    order = {nid: k for k, nid in enumerate(nodes)}
    try:
        edges = [(order[s], order[t]) for s, t in raw_edges]
    except KeyError as exc:
        raise GraphParseError(f"GML edge references unknown node {exc.args[0]}") from None
    return Graph.from_edges(len(nodes), edges, list(nodes.values()))


def _gml_tokens(text: str) -> list[str]:
    out: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "[]":
            out.append(c)
            i += 1
        elif c == '"':
            j = text.index('"', i + 1)
            out.append(text[i + 1 : j])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "[]":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def load_graph(path: str, fmt: str | None = None) -> Graph:
    """Load ``path`` as GML or edge list (guessed from the extension)."""
    fmt = fmt or ("gml" if path.lower().endswith(".gml") else "edgelist")
    if fmt == "gml":
        return load_gml(path)
    if fmt == "edgelist":
        if path.endswith(".gz"):
            import gzip

            with gzip.open(path, "rt", encoding="utf-8") as fh:
                return load_edge_list(fh)
        return load_edge_list(path)
    raise ValueError(f"unknown graph format {fmt!r}")


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component, densely re-indexed.

    Ties go to the component holding the smallest node index.  The result's
    ``index_map[i]`` is the original index of new node ``i`` (composed through
    earlier subgraph calls).
    """
    if g.n == 0:
        raise ValueError("empty graph")
    _, comp = connected_components(g.adjacency(), directed=False)
    sizes = np.bincount(comp)
    best = sizes.max()
    # first node (smallest index) lying in any maximum-size component
    winner = comp[np.flatnonzero(sizes[comp] == best)[0]]
    keep = np.flatnonzero(comp == winner)
    return induced_subgraph(g, keep)


def induced_subgraph(g: Graph, keep: np.ndarray) -> Graph:
    keep = np.sort(np.asarray(keep, dtype=np.int64))
    new_index = np.full(g.n, -1, dtype=np.int64)
    new_index[keep] = np.arange(len(keep))
    e = g.edges()
    mask = (new_index[e[:, 0]] >= 0) & (new_index[e[:, 1]] >= 0)
    sub_edges = new_index[e[mask]]
    labels = [g.labels[i] for i in keep] if g.labels is not None else None
    sub = Graph.from_edges(len(keep), map(tuple, sub_edges), labels)
    base = g.index_map if g.index_map is not None else np.arange(g.n)
    object.__setattr__(sub, "index_map", base[keep])
    return sub


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return False
    ncomp, _ = connected_components(g.adjacency(), directed=False)
    return ncomp == 1


def write_edge_list(g: Graph, fh: TextIO) -> None:
    for u, v in g.edges():
        fh.write(f"{g.label(u)} {g.label(v)}\n")
