"""Average consensus on random geometric sensor networks with a best-constant weight.

The weight is computed from two Laplacian eigenvalues (largest and algebraic
connectivity), which here come out of the same spectral pipeline, so the whole
loop needs nothing beyond neighbour communication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .graph import Graph, MatrixKind, is_connected, lambda_max_bound
from .integrators import RunConfig, choose_params
from .spectral import run_pipeline


@dataclass(frozen=True)
class GeometricGraphSpec:
    n: int
    radius: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


def sample_points(spec: GeometricGraphSpec) -> np.ndarray:
    return np.random.default_rng(spec.seed).random((spec.n, 2))


def rgg_generate(spec: GeometricGraphSpec) -> Graph:
    """Unit-square random geometric graph: ``u ~ v`` iff ``|p_u - p_v| <= radius``."""
    pts = sample_points(spec)
    pairs = cKDTree(pts).query_pairs(spec.radius, output_type="ndarray")
    return Graph.from_edges(spec.n, map(tuple, pairs))


def connected_rgg(n: int, radius: float, seed: int = 0, max_tries: int = 1000) -> tuple[Graph, int, int]:
    """First connected sample from seeds ``seed, seed+1, ...``.

    Returns ``(graph, seed_used, rejected)``.
    """
    for k in range(max_tries):
        g = rgg_generate(GeometricGraphSpec(n, radius, seed + k))
        if is_connected(g):
            return g, seed + k, k
    raise RuntimeError(f"no connected RGG({n}, {radius}) in {max_tries} tries")


def best_constant_weight(lambda_largest: float, lambda_second_smallest: float) -> float:
    """``w = 2 / (lambda_max + lambda_2)``, optimal for ``x <- (I - w L) x``."""
    if not (lambda_largest > 0 and lambda_second_smallest > 0):
        raise ValueError("need positive extreme eigenvalues (is the graph connected?)")
    return 2.0 / (lambda_largest + lambda_second_smallest)


@dataclass
class ConsensusRun:
    w: float
    initial: np.ndarray
    mean: float
    steps: int
    converged: bool
    final_error: float
    trajectory: np.ndarray | None = None
    sums: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"w": self.w, "steps_to_converge": self.steps if self.converged else None,
                "converged": self.converged, "final_error": self.final_error, "mean": self.mean}


def consensus_run(g: Graph, w: float, m, tol: float = 1e-8, max_steps: int = 100_000,
                  keep_trajectory: bool = False) -> ConsensusRun:
    """Iterate ``x(t+1) = x(t) - w L x(t)`` until every node is within ``tol`` of the mean."""
    x = np.array(m, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError(f"initial values must have length {g.n}")
    apply = g.operator(MatrixKind.LAPLACIAN)
    mean = float(x.mean())
    traj = [x.copy()] if keep_trajectory else None
    sums = [x.sum()]
    err = float(np.max(np.abs(x - mean)))
    t = 0
    while err > tol and t < max_steps:
        x = x - w * apply(x)
        t += 1
        err = float(np.max(np.abs(x - mean)))
        sums.append(x.sum())
        if keep_trajectory:
            traj.append(x.copy())
    return ConsensusRun(w, np.array(m, dtype=np.float64), mean, t, err <= tol, err,
                        np.array(traj) if keep_trajectory else None, np.array(sums))


@dataclass
class SelfTuned:
    w: float
    lambda_max: float
    lambda_2: float
    config: RunConfig


def estimate_weight(g: Graph, lambda_diff: float = 0.05, safety: float = 0.5, seed: int = 0,
                    threshold: float = 1e-3, scheme: str = "si2") -> SelfTuned:
    """Best-constant weight from the spectral pipeline's extreme peaks.

    The largest detected eigenvalue and the smallest one clearly away from zero
    feed :func:`best_constant_weight`.
    """
    eps, s, _ = choose_params(lambda_max_bound(g), lambda_diff, safety)
    cfg = RunConfig(scheme, eps, s, seed=seed, threshold=threshold)
    res = run_pipeline(g, cfg)
    vals = res.values
    floor = res.spectrum.spacing
    nonzero = vals[vals > floor]
    if not len(nonzero):
        raise RuntimeError("no nonzero eigenvalue detected")
    lam_max, lam_2 = float(nonzero.max()), float(nonzero.min())
    return SelfTuned(best_constant_weight(lam_max, lam_2), lam_max, lam_2, cfg)
