"""From trajectories to eigenpairs: windowed transform, peak picking, eigenvector assembly."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import integrators as integ
from .graph import Graph, MatrixKind, lambda_max_bound
from .integrators import RunConfig, Scheme, StageCoefficients, StatePair, Trajectory

log = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass
class SpectrumEstimate:
    """``values[k, j]`` approximates the spectrum at ``theta[k]`` seen by node ``nodes[j]``."""

    theta: np.ndarray
    values: np.ndarray
    nodes: np.ndarray
    eps: float
    v: float
    t0: float
    scheme: Scheme
    n_samples: int
    one_sided: bool = True
    matrix: MatrixKind = MatrixKind.LAPLACIAN

    @property
    def n_fft(self) -> int:
        return len(self.theta)

    @property
    def spacing(self) -> float:
        """Grid spacing ``2 pi / (N eps)``."""
        return 2 * math.pi / (self.n_fft * self.eps)

    @property
    def signed_theta(self) -> np.ndarray:
        """Frequencies folded into ``[-pi/eps, pi/eps)``."""
        nyq = math.pi / self.eps
        return np.where(self.theta >= nyq, self.theta - 2 * nyq, self.theta)

    def column(self, node: int) -> int:
        hits = np.flatnonzero(self.nodes == node)
        if not len(hits):
            raise KeyError(f"node {node} was not recorded")
        return int(hits[0])

    def band_mask(self) -> np.ndarray:
        th = self.signed_theta
        nyq = math.pi / self.eps
        if self.matrix is MatrixKind.LAPLACIAN:
            return (th >= 0) & (th <= nyq)
        return np.ones(len(th), dtype=bool)

    def detection_signal(self, probe: int | None = None, part: str = "real") -> np.ndarray:
        """Non-negative curve scanned for peaks.

        For one node: ``|Re f|`` (or ``|f|``).  Aggregated: the root-sum-square over
        recorded nodes, which at an isolated eigenvalue equals the size of the
        initial vector's component in that eigenspace.
        """
        vals = self.values if probe is None else self.values[:, [self.column(probe)]]
        comp = vals.real if part == "real" else np.abs(vals)
        if comp.shape[1] == 1:
            return np.abs(comp[:, 0])
        return np.sqrt(np.einsum("ij,ij->i", comp, comp))


@dataclass
class EigenPairEstimate:
    value: float
    theta: float
    bin: int
    amplitudes: np.ndarray
    vector: np.ndarray
    nodes: np.ndarray
    peak: float
    flipped: bool = False
    overlap: float | None = None

    def to_dict(self, vectors: bool = True) -> dict:
        d = {"lambda": self.value, "theta": self.theta, "bin": self.bin, "peak": self.peak}
        if self.overlap is not None:
            d["overlap"] = self.overlap
        if vectors:
            d["vector"] = [float(c) for c in self.vector]
        return d


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def auto_smoothing(eps: float, samples: int, floor: float = 1e-8) -> float:
    """Gaussian variance whose window ``exp(-t^2 v / 2)`` falls to ``floor`` at the last sample."""
    t_end = (samples - 1) * eps
    return 2 * math.log(1 / floor) / t_end**2


def trajectory_dft(traj: Trajectory, v: float = 0.0, t0: float | None = None,
                   one_sided: bool = True, n_fft: int | None = None) -> SpectrumEstimate:
    """Discrete estimate of ``(2 pi)^{-1/2} int psi(t) exp(-t^2 v/2 - i theta t) dt``.

    With ``one_sided`` the first sample is weighted once and later samples twice,
    which, after taking real parts, stands in for the integral over negative time
    as well (valid when the initial imaginary part is zero).  Samples sit at
    ``t0 + l*eps``; the window is evaluated at those absolute times.
    """
    t0 = traj.t0 if t0 is None else t0
    s = traj.n_samples
    n_fft = n_fft or next_pow2(s)
    if n_fft < s:
        raise ValueError("n_fft must be >= number of samples")
    if not np.all(np.isfinite(traj.samples)):
        raise ValueError("trajectory contains non-finite samples")
    t = t0 + traj.eps * np.arange(s)
    w = np.exp(-0.5 * v * t**2) if v > 0 else np.ones(s)
    if one_sided:
        w = w * 2.0
        w[0] *= 0.5
    spec = np.fft.fft(traj.samples * w[:, None], n=n_fft, axis=0)
    theta = 2 * math.pi * np.arange(n_fft) / (n_fft * traj.eps)
    scale = traj.eps / SQRT_2PI
    if t0:
        spec *= (scale * np.exp(-1j * t0 * theta))[:, None]
    else:
        spec *= scale
    matrix = traj.config.matrix if traj.config is not None else MatrixKind.LAPLACIAN
    return SpectrumEstimate(theta, spec, np.asarray(traj.nodes), traj.eps, v, t0,
                            traj.scheme, s, one_sided, matrix)


def frequency_to_eigenvalue(theta: float, scheme: Scheme | str, eps: float | None = None,
                            coeffs: StageCoefficients | None = None) -> float:
    """Map a spectral peak position to an eigenvalue.

    Without ``eps`` the continuous-time relation is used: ``lambda = theta^2`` for
    the spring system, ``lambda = theta`` for Schrodinger schemes.  With ``eps`` the
    scheme's exact per-step phase relation is inverted instead, which removes the
    integrator's frequency error (for the order-2 split step,
    ``lambda = (2/eps) sin(theta eps / 2)``).
    """
    scheme = Scheme(scheme)
    if eps is None:
        return theta * theta if scheme is Scheme.LEAPFROG2 else theta
    sign = -1.0 if theta < 0 else 1.0
    phi = min(abs(theta) * eps, math.pi)
    if scheme is Scheme.LEAPFROG2:
        a = 2 * math.sin(phi / 2)
        return (a / eps) ** 2
    if scheme is Scheme.EULER:
        a = math.tan(phi) if phi < math.pi / 2 else math.inf
    elif scheme is Scheme.SI2:
        a = 2 * math.sin(phi / 2)
    else:
        a = _invert_phase(scheme, phi, coeffs)
    return sign * a / eps


def _invert_phase(scheme: Scheme, phi: float, coeffs: StageCoefficients | None) -> float:
    if phi == 0:
        return 0.0
    a_hi = integ.stability_limit(scheme, coeffs)
    f_hi = integ.phase_per_step(scheme, a_hi, coeffs)
    if not phi < f_hi:
        return a_hi
    return brentq(lambda a: integ.phase_per_step(scheme, a, coeffs) - phi, 0.0, a_hi,
                  xtol=1e-15, rtol=1e-14)


def detect_peaks(spec: SpectrumEstimate, probe: int | None = None, rel_threshold: float = 0.05,
                 part: str = "real") -> list[int]:
    """Strict local maxima of the detection signal at or above ``rel_threshold * max``.

    Only bins in the physical band are returned, ordered by signed frequency.
    """
    sig = spec.detection_signal(probe, part)
    band = spec.band_mask()
    if not band.any():
        return []
    top = sig[band].max()
    if top <= 0:
        return []
    is_max = (sig > np.roll(sig, 1)) & (sig > np.roll(sig, -1))
    hits = np.flatnonzero(is_max & band & (sig >= rel_threshold * top))
    order = np.argsort(spec.signed_theta[hits], kind="stable")
    return [int(b) for b in hits[order]]


def interpolate_peak(spec: SpectrumEstimate, k: int, probe: int | None = None,
                     part: str = "real") -> float:
    """Refine bin ``k`` to a signed frequency by a 3-point parabola.

    The parabola is fitted to log-magnitudes when all three are positive (exact for
    Gaussian-windowed peaks), otherwise to the magnitudes themselves.
    """
    sig = spec.detection_signal(probe, part)
    n = len(sig)
    a, b, c = sig[(k - 1) % n], sig[k], sig[(k + 1) % n]
    if a > 0 and b > 0 and c > 0:
        a, b, c = math.log(a), math.log(b), math.log(c)
    denom = a - 2 * b + c
    offset = 0.5 * (a - c) / denom if denom < 0 else 0.0
    offset = max(-0.5, min(0.5, offset))
    return float(spec.signed_theta[k] + offset * spec.spacing)


def extract_eigenpairs(spec: SpectrumEstimate, bins: list[int], a0=None,
                       scheme: Scheme | str | None = None, probe: int | None = None,
                       part: str = "real", dispersion: bool = True,
                       coeffs: StageCoefficients | None = None) -> list[EigenPairEstimate]:
    """Eigenvalue and unit eigenvector estimate per peak bin.

    The vector is the real part of the spectrum across recorded nodes at the bin;
    it carries the unknown factor ``u^T a0``, removed by normalising.  The sign is
    fixed so the largest-magnitude entry (first one on ties) is positive.
    """
    scheme = Scheme(scheme or spec.scheme)
    a0 = None if a0 is None else np.asarray(a0, dtype=np.float64)[spec.nodes]
    sig = spec.detection_signal(probe, part)
    out = []
    for k in bins:
        amp = spec.values[k].real.copy()
        norm = np.linalg.norm(amp)
        if not norm > 0:
            log.warning("dropping bin %d: zero amplitude vector", k)
            continue
        theta = interpolate_peak(spec, k, probe, part)
        lam = frequency_to_eigenvalue(theta, scheme, spec.eps if dispersion else None, coeffs)
        vec = amp / norm
        mag = np.abs(vec)
        # ties (e.g. +-1/sqrt(2)) go to the lowest index so the sign is reproducible
        lead = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
        flip = vec[lead] < 0
        if flip:
            vec = -vec
        overlap = float(vec @ a0) if a0 is not None else None
        out.append(EigenPairEstimate(lam, theta, int(k), amp, vec, spec.nodes, float(sig[k]),
                                     bool(flip), overlap))
    return out


@dataclass
class PipelineResult:
    config: RunConfig
    state: StatePair
    trajectory: Trajectory
    spectrum: SpectrumEstimate
    bins: list[int]
    eigenpairs: list[EigenPairEstimate] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.eigenpairs])


def check_sampling(g: Graph, config: RunConfig) -> None:
    """Reject step sizes that put eigenfrequencies above the band edge."""
    bound = lambda_max_bound(g, config.matrix)
    if bound <= 0:
        raise ValueError("graph has no edges: lambda_max bound is 0")
    top = math.sqrt(bound) if config.scheme is Scheme.LEAPFROG2 else bound
    if config.eps > math.pi / top * (1 + 1e-12):
        raise ValueError(f"eps={config.eps:g} exceeds pi/{top:g}={math.pi / top:g}")


def run_pipeline(g: Graph, config: RunConfig, state: StatePair | None = None,
                 track_energy: bool = False, runner=None) -> PipelineResult:
    """Integrate, transform, detect and extract, returning every intermediate.

    ``runner(g, config, state) -> Trajectory`` replaces the centralised
    integrator, e.g. with the message-passing simulation.
    """
    check_sampling(g, config)
    if state is None:
        state = integ.init_state(g.n, config.seed, config.init)
    coeffs = config.stage_coefficients() if config.scheme is Scheme.SI4 else None
    if runner is None:
        traj = integ.run(g, config, state, track_energy=track_energy)
    else:
        traj = runner(g, config, state)
    v = auto_smoothing(config.eps, config.samples, config.window_floor) if config.v is None else config.v
    spec = trajectory_dft(traj, v=v, one_sided=config.one_sided)
    bins = detect_peaks(spec, config.detect_at, config.threshold, config.part)
    pairs = extract_eigenpairs(spec, bins, state.x, config.scheme, config.detect_at, config.part,
                               config.dispersion_correction, coeffs)
    pairs.sort(key=lambda e: e.value)
    return PipelineResult(config, state, traj, spec, bins, pairs)


def full_pipeline(g: Graph, config: RunConfig) -> list[EigenPairEstimate]:
    return run_pipeline(g, config).eigenpairs


def spectrum_to_csv(spec: SpectrumEstimate, fh, nodes=None, band_only: bool = True) -> None:
    cols = range(len(spec.nodes)) if nodes is None else [spec.column(u) for u in nodes]
    rows = np.flatnonzero(spec.band_mask()) if band_only else np.arange(spec.n_fft)
    th = spec.signed_theta
    rows = rows[np.argsort(th[rows], kind="stable")]
    fh.write("theta,node,re,im\n")
    for k in rows:
        for j in cols:
            z = spec.values[k, j]
            fh.write(f"{th[k]!r},{int(spec.nodes[j])},{z.real!r},{z.imag!r}\n")


def eigenpairs_to_json(pairs: list[EigenPairEstimate], vectors: bool = True, **extra) -> str:
    doc = dict(extra)
    doc["eigenpairs"] = [p.to_dict(vectors) for p in pairs]
    return json.dumps(doc, indent=2, sort_keys=True)
