"""Time-steppers for the spring (Lagrangian) and Schrodinger (Hamiltonian) systems.

Hamiltonian schemes integrate ``psi' = i M psi`` written in real form,
``x' = -M y``, ``y' = M x``, and record ``psi = x + i y``.  The Lagrangian scheme
integrates ``x'' + L x = 0`` and records ``x``.  Every scheme touches the graph
only through ``Graph.operator``, so a step costs a fixed number of sparse
matrix-vector products.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import NamedTuple

import numpy as np

from .graph import Graph, MatrixKind

DIVERGENCE_FACTOR = 1e6


class Scheme(str, enum.Enum):
    EULER = "euler"
    LEAPFROG2 = "leapfrog2"
    SI2 = "si2"
    SI4 = "si4"

    @property
    def hamiltonian(self) -> bool:
        return self is not Scheme.LEAPFROG2


class DivergenceError(RuntimeError):
    def __init__(self, step: int, ratio: float):
        super().__init__(f"trajectory diverged at step {step} (norm ratio {ratio:.3g})")
        self.step = step
        self.ratio = ratio


class ParamBudgetError(ValueError):
    def __init__(self, samples: int, budget: int, achievable: float):
        super().__init__(
            f"need {samples} samples but budget is {budget}; "
            f"best achievable lambda_diff is {achievable:.6g}"
        )
        self.samples = samples
        self.budget = budget
        self.achievable = achievable


@dataclass(frozen=True)
class StageCoefficients:
    """Kick/drift table: per stage ``y += p_j eps M x`` then ``x -= q_j eps M y``."""

    p: tuple[float, ...]
    q: tuple[float, ...]
    name: str = "custom"
    order: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(c) for c in self.p))
        object.__setattr__(self, "q", tuple(float(c) for c in self.q))
        if len(self.p) != len(self.q):
            raise ValueError(f"coefficient arrays differ in length: {len(self.p)} vs {len(self.q)}")
        if not self.p:
            raise ValueError("need at least one stage")

    @property
    def r(self) -> int:
        return len(self.p)

    @classmethod
    def load(cls, name: str | None = None) -> "StageCoefficients":
        doc = _coefficient_table()
        name = name or doc["default_order4"]
        try:
            t = doc["tables"][name]
        except KeyError:
            raise KeyError(f"no coefficient table {name!r}; have {sorted(doc['tables'])}") from None
        return cls(tuple(t["p"]), tuple(t["q"]), name=name, order=t.get("order"))

    @staticmethod
    def available() -> list[str]:
        return sorted(_coefficient_table()["tables"])


@lru_cache(maxsize=None)
def _coefficient_table() -> dict:
    text = resources.files("symspec").joinpath("data/coefficients.json").read_text()
    return json.loads(text)


@dataclass
class StatePair:
    """``psi = x + i y`` (or position/momentum for the spring system)."""

    x: np.ndarray
    y: np.ndarray
    a0: np.ndarray
    b0: np.ndarray

    @classmethod
    def from_initial(cls, a0, b0) -> "StatePair":
        a0 = np.array(a0, dtype=np.float64)
        b0 = np.array(b0, dtype=np.float64)
        if a0.shape != b0.shape or a0.ndim != 1:
            raise ValueError("a0 and b0 must be 1-d vectors of equal length")
        return cls(a0.copy(), b0.copy(), a0, b0)

    @property
    def n(self) -> int:
        return len(self.x)


class InitMode(str, enum.Enum):
    GAUSSIAN_X = "gaussian_x"  # unit Gaussian x0, y0 = 0
    GAUSSIAN_BOTH = "gaussian_both"
    GIVEN = "given"


def init_state(n: int, seed: int = 0, mode: InitMode | str = InitMode.GAUSSIAN_X,
               a0=None, b0=None) -> StatePair:
    """Initial vectors; random ones are unit-norm and fully determined by ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mode = InitMode(mode)
    if mode is InitMode.GIVEN:
        a0 = np.asarray(a0, dtype=np.float64)
        b0 = np.zeros(n) if b0 is None else np.asarray(b0, dtype=np.float64)
        if a0.shape != (n,) or b0.shape != (n,):
            raise ValueError(f"given vectors must have length {n}")
        return StatePair.from_initial(a0, b0)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    if mode is InitMode.GAUSSIAN_BOTH:
        y = rng.standard_normal(n)
        y /= np.linalg.norm(y)
    else:
        y = np.zeros(n)
    return StatePair.from_initial(x, y)


@dataclass(frozen=True)
class RunConfig:
    """One integration-plus-analysis run.

    ``v=None`` picks a Gaussian window that decays to ``window_floor`` by the end
    of the record; ``v=0`` disables smoothing.  ``probe_nodes`` restricts what
    is recorded (empty = all nodes); ``detect_at`` chooses the node whose spectrum
    is scanned for peaks (``None`` aggregates over recorded nodes).
    """

    scheme: Scheme
    eps: float
    samples: int
    matrix: MatrixKind = MatrixKind.LAPLACIAN
    v: float | None = None
    seed: int = 0
    probe_nodes: tuple[int, ...] = ()
    init: InitMode = InitMode.GAUSSIAN_X
    coefficients: str | None = None
    t0: float = 0.0
    one_sided: bool = True
    window_floor: float = 1e-8
    threshold: float = 0.05
    part: str = "real"
    detect_at: int | None = None
    dispersion_correction: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "matrix", MatrixKind(self.matrix))
        object.__setattr__(self, "init", InitMode(self.init))
        object.__setattr__(self, "probe_nodes", tuple(int(u) for u in self.probe_nodes))
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError("eps must be a positive finite number")
        if int(self.samples) != self.samples or self.samples < 2:
            raise ValueError("samples must be an integer >= 2")
        if self.v is not None and not self.v >= 0:
            raise ValueError("smoothing variance v must be >= 0")
        if self.part not in ("real", "abs"):
            raise ValueError("part must be 'real' or 'abs'")
        if not 0 <= self.threshold <= 1:
            raise ValueError("threshold must lie in [0, 1]")
        if self.scheme is Scheme.LEAPFROG2 and self.matrix is not MatrixKind.LAPLACIAN:
            raise ValueError("the spring system needs a positive semidefinite matrix (Laplacian)")

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def duration(self) -> float:
        return self.samples * self.eps

    def stage_coefficients(self) -> StageCoefficients:
        return StageCoefficients.load(self.coefficients)


@dataclass
class Trajectory:
    """``samples[i, k]`` is the state of node ``nodes[k]`` at time ``t0 + i*eps``."""

    samples: np.ndarray
    nodes: np.ndarray
    eps: float
    scheme: Scheme
    config: RunConfig | None = None
    norm_ratio: np.ndarray | None = None
    energy: np.ndarray | None = None
    t0: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.eps * np.arange(self.n_samples)

    @property
    def max_norm_ratio(self) -> float:
        return float(np.max(self.norm_ratio)) if self.norm_ratio is not None else float("nan")

    def energy_drift(self) -> float:
        """``max_i |H_i - H_0| / H_0``."""
        if self.energy is None:
            raise ValueError("run with track_energy=True to record the Hamiltonian")
        h0 = self.energy[0]
        return float(np.max(np.abs(self.energy - h0)) / abs(h0))

    def to_csv(self, fh) -> None:
        fh.write("time,node,re,im\n")
        t = self.times
        for i in range(self.n_samples):
            for k, u in enumerate(self.nodes):
                z = self.samples[i, k]
                fh.write(f"{t[i]!r},{int(u)},{z.real!r},{z.imag!r}\n")


class Params(NamedTuple):
    eps: float
    samples: int
    resolution: float


def choose_params(lambda_max_bound: float, lambda_diff: float, safety: float = 0.5,
                  budget: int = 1 << 22) -> Params:
    """Step size and sample count from the sampling constraints.

    ``eps = safety * pi / lambda_max_bound`` keeps every eigenfrequency below the
    band edge; ``samples = ceil(2 pi / (eps * lambda_diff))`` gives frequency
    resolution ``2 pi / (samples * eps) <= lambda_diff``.  ``safety <= 0.6`` also
    keeps the order-2 split step stable (it needs ``eps * lambda < 2``).
    """
    if not lambda_max_bound > 0:
        raise ValueError("lambda_max_bound must be > 0 (graph has no edges?)")
    if not lambda_diff > 0:
        raise ValueError("lambda_diff must be > 0")
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    eps = safety * math.pi / lambda_max_bound
    # tolerate round-off when the ratio is an exact integer
    s = max(2, math.ceil(2 * math.pi / (eps * lambda_diff) * (1 - 1e-12)))
    if s > budget:
        raise ParamBudgetError(s, budget, 2 * math.pi / (eps * budget))
    return Params(eps, s, 2 * math.pi / (s * eps))


def _record_index(config: RunConfig, n: int) -> np.ndarray:
    if config.probe_nodes:
        idx = np.asarray(config.probe_nodes, dtype=np.int64)
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("probe node out of range")
        return idx
    return np.arange(n)


def _check(step: int, ratio: float, guard: bool) -> None:
    if not math.isfinite(ratio):
        raise DivergenceError(step, ratio)
    if guard and ratio > DIVERGENCE_FACTOR:
        raise DivergenceError(step, ratio)


def _norm0(*vs) -> float:
    n = math.sqrt(sum(float(v @ v) for v in vs))
    return n if n > 0 else 1.0


def leapfrog2_run(g: Graph, config: RunConfig, state: StatePair,
                  track_energy: bool = False) -> Trajectory:
    """Half-step leapfrog for ``x'' = -L x``; records ``x`` (momentum stays internal).

    ``p_{1/2} = p_0 - eps/2 L x_0``, then ``x_i = x_{i-1} + eps p_{i-1/2}``,
    ``p_{i+1/2} = p_{i-1/2} - eps L x_i``.
    """
    apply = g.operator(config.matrix)
    eps, half = config.eps, 0.5 * config.eps
    rec = _record_index(config, g.n)
    s = config.samples
    out = np.zeros((s, len(rec)), dtype=np.complex128)
    ratio = np.empty(s)
    energy = np.empty(s) if track_energy else None

    x = state.x.copy()
    lx = apply(x)
    p = state.y - half * lx
    base = _norm0(state.x)
    out[0].real = x[rec]
    ratio[0] = 1.0
    if track_energy:
        energy[0] = 0.5 * (state.y @ state.y) + 0.5 * (x @ lx)
    for i in range(1, s):
        x = x + eps * p
        lx = apply(x)
        if track_energy:
            p_int = p - half * lx  # momentum at the integer step
            energy[i] = 0.5 * (p_int @ p_int) + 0.5 * (x @ lx)
        p = p - eps * lx
        out[i].real = x[rec]
        ratio[i] = math.sqrt(x @ x) / base
        _check(i, ratio[i], guard=True)
    return Trajectory(out, rec, eps, Scheme.LEAPFROG2, config, ratio, energy, config.t0)


def si2_run(g: Graph, config: RunConfig, state: StatePair,
            track_energy: bool = False) -> Trajectory:
    """Order-2 split-operator step, reusing ``dy = -M x`` across iterations.

    ``y_{i-1/2} = y_{i-1} - eps/2 dy``; ``x_i = x_{i-1} - eps M y_{i-1/2}``;
    ``dy = -M x_i``; ``y_i = y_{i-1/2} - eps/2 dy``.
    """
    apply = g.operator(config.matrix)
    eps, half = config.eps, 0.5 * config.eps
    rec = _record_index(config, g.n)
    s = config.samples
    out = np.empty((s, len(rec)), dtype=np.complex128)
    ratio = np.empty(s)
    energy = np.empty(s) if track_energy else None

    x, y = state.x.copy(), state.y.copy()
    dy = -apply(x)
    base = _norm0(x, y)
    out[0] = x[rec] + 1j * y[rec]
    ratio[0] = 1.0
    if track_energy:
        energy[0] = _hamiltonian(apply, x, y, -dy)
    for i in range(1, s):
        y = y - half * dy
        x = x - eps * apply(y)
        dy = -apply(x)
        y = y - half * dy
        out[i] = x[rec] + 1j * y[rec]
        ratio[i] = math.sqrt(x @ x + y @ y) / base
        _check(i, ratio[i], guard=True)
        if track_energy:
            energy[i] = _hamiltonian(apply, x, y, -dy)
    return Trajectory(out, rec, eps, Scheme.SI2, config, ratio, energy, config.t0)


def si4_run(g: Graph, config: RunConfig, state: StatePair,
            coeffs: StageCoefficients | None = None,
            track_energy: bool = False) -> Trajectory:
    """r-stage kick/drift integrator; ``M x`` is cached while ``x`` is unchanged."""
    coeffs = coeffs or config.stage_coefficients()
    apply = g.operator(config.matrix)
    eps = config.eps
    kicks = [c * eps for c in coeffs.p]
    drifts = [c * eps for c in coeffs.q]
    rec = _record_index(config, g.n)
    s = config.samples
    out = np.empty((s, len(rec)), dtype=np.complex128)
    ratio = np.empty(s)
    energy = np.empty(s) if track_energy else None

    x, y = state.x.copy(), state.y.copy()
    mx = apply(x)
    base = _norm0(x, y)
    out[0] = x[rec] + 1j * y[rec]
    ratio[0] = 1.0
    if track_energy:
        energy[0] = _hamiltonian(apply, x, y, mx)
    for i in range(1, s):
        for kp, kq in zip(kicks, drifts):
            if kp:
                if mx is None:
                    mx = apply(x)
                y = y + kp * mx
            if kq:
                x = x - kq * apply(y)
                mx = None
        out[i] = x[rec] + 1j * y[rec]
        ratio[i] = math.sqrt(x @ x + y @ y) / base
        _check(i, ratio[i], guard=True)
        if track_energy:
            if mx is None:
                mx = apply(x)
            energy[i] = _hamiltonian(apply, x, y, mx)
    return Trajectory(out, rec, eps, Scheme.SI4, config, ratio, energy, config.t0)


def euler_run(g: Graph, config: RunConfig, state: StatePair,
              track_energy: bool = False) -> Trajectory:
    """Explicit Euler on the real form; grows by ``sqrt(1 + (eps lambda)^2)`` per step.

    Growth is reported through ``norm_ratio`` rather than aborting the run.
    """
    apply = g.operator(config.matrix)
    eps = config.eps
    rec = _record_index(config, g.n)
    s = config.samples
    out = np.empty((s, len(rec)), dtype=np.complex128)
    ratio = np.empty(s)
    energy = np.empty(s) if track_energy else None

    x, y = state.x.copy(), state.y.copy()
    base = _norm0(x, y)
    out[0] = x[rec] + 1j * y[rec]
    ratio[0] = 1.0
    mx = apply(x)
    if track_energy:
        energy[0] = _hamiltonian(apply, x, y, mx)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, s):
            my = apply(y)
            x, y = x - eps * my, y + eps * mx
            mx = apply(x)
            out[i] = x[rec] + 1j * y[rec]
            ratio[i] = math.sqrt(x @ x + y @ y) / base
            _check(i, ratio[i], guard=False)
            if track_energy:
                energy[i] = _hamiltonian(apply, x, y, mx)
    return Trajectory(out, rec, eps, Scheme.EULER, config, ratio, energy, config.t0)


def _hamiltonian(apply, x, y, mx) -> float:
    return 0.5 * float(x @ mx) + 0.5 * float(y @ apply(y))


def run(g: Graph, config: RunConfig, state: StatePair | None = None,
        track_energy: bool = False) -> Trajectory:
    """Dispatch on ``config.scheme``; draws the initial state from the seed if not given."""
    if state is None:
        state = init_state(g.n, config.seed, config.init)
    if state.n != g.n:
        raise ValueError("state length does not match graph")
    if config.scheme is Scheme.LEAPFROG2:
        return leapfrog2_run(g, config, state, track_energy)
    if config.scheme is Scheme.SI2:
        return si2_run(g, config, state, track_energy)
    if config.scheme is Scheme.SI4:
        return si4_run(g, config, state, track_energy=track_energy)
    return euler_run(g, config, state, track_energy)


# -- discrete dispersion relations -------------------------------------------------
#
# Every scheme maps an eigencomponent (eigenvalue lam, a = eps*lam) through a fixed
# 2x2 matrix per step.  The recorded phase advance per step is therefore a known
# function of a, which lets the spectral module undo the integrator's frequency
# distortion exactly.


def eigenplane_map(scheme: Scheme | str, a: float, coeffs: StageCoefficients | None = None) -> np.ndarray:
    """One-step matrix acting on ``(x, y)`` for an eigencomponent with ``a = eps * lambda``.

    For the spring scheme ``a = eps * sqrt(lambda)`` and the state is ``(x, p)``.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.EULER:
        return np.array([[1.0, -a], [a, 1.0]])
    if scheme is Scheme.LEAPFROG2:
        kick = np.array([[1.0, 0.0], [-0.5 * a, 1.0]])
        drift = np.array([[1.0, a], [0.0, 1.0]])
        return kick @ drift @ kick
    if scheme is Scheme.SI2:
        coeffs = StageCoefficients.load("strang")
    elif coeffs is None:
        coeffs = StageCoefficients.load()
    m = np.eye(2)
    for p, q in zip(coeffs.p, coeffs.q):
        m = np.array([[1.0, 0.0], [p * a, 1.0]]) @ m
        m = np.array([[1.0, -q * a], [0.0, 1.0]]) @ m
    return m


def phase_per_step(scheme: Scheme | str, a: float, coeffs: StageCoefficients | None = None) -> float:
    """Numerical rotation angle per step (in ``[0, pi]`` while the map is stable)."""
    scheme = Scheme(scheme)
    if scheme is Scheme.EULER:
        return math.atan(a)
    half_trace = 0.5 * np.trace(eigenplane_map(scheme, a, coeffs))
    if abs(half_trace) > 1:
        return float("nan")
    return math.acos(half_trace)


def stability_limit(scheme: Scheme | str, coeffs: StageCoefficients | None = None,
                    a_max: float = 10.0, step: float = 1e-3) -> float:
    """Largest ``a`` such that the step map is stable on ``[0, a]``."""
    scheme = Scheme(scheme)
    if scheme is Scheme.EULER:
        return 0.0
    key = (scheme, coeffs)
    if key not in _stab_cache:
        grid = np.arange(step, a_max, step)
        half = np.array([0.5 * np.trace(eigenplane_map(scheme, a, coeffs)) for a in grid])
        bad = np.flatnonzero(np.abs(half) >= 1.0)
        _stab_cache[key] = float(grid[bad[0] - 1]) if len(bad) else float(a_max)
    return _stab_cache[key]


_stab_cache: dict = {}
