"""Graph spectra from symplectic integration of spring and Schrodinger dynamics."""

from .graph import Graph, MatrixKind, load_edge_list, load_gml, largest_connected_component, matvec
from .integrators import RunConfig, Scheme, StageCoefficients, StatePair, Trajectory, choose_params, init_state
from .spectral import EigenPairEstimate, SpectrumEstimate, full_pipeline, run_pipeline

__all__ = [
    "Graph", "MatrixKind", "load_edge_list", "load_gml", "largest_connected_component", "matvec",
    "RunConfig", "Scheme", "StageCoefficients", "StatePair", "Trajectory", "choose_params",
    "init_state", "EigenPairEstimate", "SpectrumEstimate", "full_pipeline", "run_pipeline",
]
