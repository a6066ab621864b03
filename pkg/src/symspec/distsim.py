"""Synchronous message-passing execution of the order-2 split step and the leapfrog.

Each graph node is a :class:`NodeProcess` holding a few local scalars.  A matrix
product becomes a diffusion-fusion cycle: every node sends its scalar to each
neighbour (diffusion), a barrier delivers all messages, and every node sums what
it received in ascending sender order (fusion).  Because the fusion order and the
floating-point operations match :mod:`symspec.integrators`, the trajectories agree
bit for bit with the centralised runs.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .graph import Graph
from .integrators import RunConfig, Scheme, StatePair, Trajectory, init_state


class ProtocolError(RuntimeError):
    pass


class LocalityViolation(RuntimeError):
    pass


_STATE_FIELDS = frozenset({"x", "y", "dy", "p", "lx"})


class NodeProcess:
    """One logical process; holds only its own scalars and inbox."""

    __slots__ = ("id", "neighbors", "degree", "x", "y", "dy", "p", "lx", "inbox", "outbox", "_sim")

    def __init__(self, node_id: int, neighbors: tuple[int, ...], sim: "Simulator"):
        object.__setattr__(self, "_sim", sim)
        self.id = node_id
        self.neighbors = neighbors
        self.degree = float(len(neighbors))
        self.x = self.y = self.dy = self.p = self.lx = 0.0
        self.inbox: dict[int, float] = {}
        self.outbox: list[tuple[int, float]] = []

    def __getattribute__(self, name):
        if name in _STATE_FIELDS:
            sim = object.__getattribute__(self, "_sim")
            if sim.check_locality:
                active = sim.active
                if active is not None and active is not self:
                    raise LocalityViolation(
                        f"node {active.id} read {name!r} of node {object.__getattribute__(self, 'id')}"
                    )
        return object.__getattribute__(self, name)

    def diffuse(self, value: float) -> None:
        self.outbox = [(v, value) for v in self.neighbors]

    def fuse(self, own: float, round_no: int) -> float:
        """``deg * own - sum(received)``: one row of ``L v``, computed locally."""
        acc = 0.0
        for v in self.neighbors:  # ascending, same order as the CSR row
            try:
                acc += self.inbox.pop(v)
            except KeyError:
                raise ProtocolError(f"node {self.id} missing message from {v} in round {round_no}") from None
        if self.inbox:
            raise ProtocolError(f"node {self.id} got unexpected senders {sorted(self.inbox)} in round {round_no}")
        return self.degree * own - acc


@dataclass
class RoundStats:
    iteration: int
    packets: int  # one per undirected edge per cycle
    messages: int  # one per directed edge per cycle
    barriers: int
    total_packets: int
    total_messages: int
    total_barriers: int


class Simulator:
    """Barrier-synchronised rounds over a fixed set of node processes.

    ``order_seed`` permutes the execution order of nodes in every phase; outputs
    must not depend on it.  ``workers > 1`` runs a phase on a thread pool.
    ``drop`` is a fault hook ``(round, sender, receiver) -> bool`` for tests.
    """

    def __init__(self, g: Graph, order_seed: int | None = None, workers: int = 1,
                 check_locality: bool = False,
                 drop: Callable[[int, int, int], bool] | None = None):
        self.g = g
        self.check_locality = check_locality
        self.active: NodeProcess | None = None
        self.nodes = [NodeProcess(u, tuple(int(v) for v in g.neighbors(u)), self) for u in range(g.n)]
        self._rng = random.Random(order_seed) if order_seed is not None else None
        self.workers = workers
        self.drop = drop
        self.round_no = 0
        self.packets = 0
        self.messages = 0
        self.barriers = 0
        self.global_reductions = 0  # stays 0: the protocol has none

    def _order(self) -> list[NodeProcess]:
        if self._rng is None:
            return self.nodes
        order = list(self.nodes)
        self._rng.shuffle(order)
        return order

    def phase(self, fn: Callable[[NodeProcess], None]) -> None:
        """Run ``fn`` on every node; ``fn`` may only touch the node it is given."""
        order = self._order()
        if self.workers > 1 and not self.check_locality:
            with ThreadPoolExecutor(self.workers) as pool:
                list(pool.map(fn, order))
            return
        for node in order:
            self.active = node
            try:
                fn(node)
            finally:
                self.active = None

    def barrier(self) -> None:
        """Deliver every outbound message, then release all nodes."""
        self.barriers += 1
        for node in self._order():
            for dest, payload in node.outbox:
                self.messages += 1
                if self.drop is not None and self.drop(self.round_no, node.id, dest):
                    continue
                self.nodes[dest].inbox[node.id] = payload
            node.outbox = []

    def cycle(self, send: Callable[[NodeProcess], float],
              fuse: Callable[[NodeProcess, float], None]) -> None:
        """Diffusion, barrier, fusion: one distributed ``L v``."""
        self.round_no += 1
        r = self.round_no
        before = self.messages
        self.phase(lambda nd: nd.diffuse(send(nd)))
        self.barrier()
        self.packets += (self.messages - before) // 2
        self.phase(lambda nd: fuse(nd, nd.fuse(send(nd), r)))

    def _stats(self, it: int, p0: int, m0: int, b0: int) -> RoundStats:
        return RoundStats(it, self.packets - p0, self.messages - m0, self.barriers - b0,
                          self.packets, self.messages, self.barriers)


def _collect(sim: Simulator, rec: np.ndarray, attr_re: str, attr_im: str | None) -> np.ndarray:
    sim_nodes = sim.nodes
    re = np.array([object.__getattribute__(sim_nodes[u], attr_re) for u in rec])
    if attr_im is None:
        return re.astype(np.complex128)
    im = np.array([object.__getattribute__(sim_nodes[u], attr_im) for u in rec])
    return re + 1j * im


def _record_nodes(config: RunConfig, n: int) -> np.ndarray:
    return np.asarray(config.probe_nodes, dtype=np.int64) if config.probe_nodes else np.arange(n)


def run_distributed_si2(g: Graph, config: RunConfig, state: StatePair | None = None,
                        **sim_kw) -> tuple[Trajectory, list[RoundStats], Simulator]:
    """Order-2 split step as two diffusion-fusion cycles and three barriers per iteration.

    An extra setup cycle computes the initial ``dy = -L x_0``; it is reported by the
    simulator totals but not in the per-iteration history.
    """
    if config.scheme is not Scheme.SI2:
        raise ValueError("config.scheme must be si2")
    state = state or init_state(g.n, config.seed, config.init)
    sim = Simulator(g, **sim_kw)
    eps, half = config.eps, 0.5 * config.eps
    for nd, xu, yu in zip(sim.nodes, state.x, state.y):
        nd.x, nd.y = float(xu), float(yu)

    def set_dy(nd, lv):
        nd.dy = -lv

    sim.cycle(lambda nd: nd.x, set_dy)

    rec = _record_nodes(config, g.n)
    out = np.empty((config.samples, len(rec)), dtype=np.complex128)
    out[0] = _collect(sim, rec, "x", "y")
    history = []

    def half_kick(nd):
        nd.y = nd.y - half * nd.dy

    def drift(nd, ly):
        nd.x = nd.x - eps * ly

    def finish(nd, lx):
        nd.dy = -lx
        nd.y = nd.y - half * nd.dy

    for i in range(1, config.samples):
        p0, m0, b0 = sim.packets, sim.messages, sim.barriers
        sim.barrier()  # iteration start
        sim.phase(half_kick)
        sim.cycle(lambda nd: nd.y, drift)
        sim.cycle(lambda nd: nd.x, finish)
        out[i] = _collect(sim, rec, "x", "y")
        history.append(sim._stats(i, p0, m0, b0))
    traj = Trajectory(out, rec, eps, Scheme.SI2, config, None, None, config.t0)
    return traj, history, sim


def run_distributed_leapfrog2(g: Graph, config: RunConfig, state: StatePair | None = None,
                              **sim_kw) -> tuple[Trajectory, list[RoundStats], Simulator]:
    """Half-step leapfrog with one diffusion-fusion cycle and two barriers per iteration."""
    if config.scheme is not Scheme.LEAPFROG2:
        raise ValueError("config.scheme must be leapfrog2")
    state = state or init_state(g.n, config.seed, config.init)
    sim = Simulator(g, **sim_kw)
    eps, half = config.eps, 0.5 * config.eps
    for nd, xu, pu in zip(sim.nodes, state.x, state.y):
        nd.x, nd.p = float(xu), float(pu)

    def start_momentum(nd, lx):
        nd.p = nd.p - half * lx

    sim.cycle(lambda nd: nd.x, start_momentum)

    rec = _record_nodes(config, g.n)
    out = np.zeros((config.samples, len(rec)), dtype=np.complex128)
    out[0] = _collect(sim, rec, "x", None)
    history = []

    def drift(nd):
        nd.x = nd.x + eps * nd.p

    def kick(nd, lx):
        nd.p = nd.p - eps * lx

    for i in range(1, config.samples):
        p0, m0, b0 = sim.packets, sim.messages, sim.barriers
        sim.barrier()
        sim.phase(drift)
        sim.cycle(lambda nd: nd.x, kick)
        out[i] = _collect(sim, rec, "x", None)
        history.append(sim._stats(i, p0, m0, b0))
    traj = Trajectory(out, rec, eps, Scheme.LEAPFROG2, config, None, None, config.t0)
    return traj, history, sim


def run_distributed(g: Graph, config: RunConfig, state: StatePair | None = None, **sim_kw):
    if config.scheme is Scheme.SI2:
        return run_distributed_si2(g, config, state, **sim_kw)
    if config.scheme is Scheme.LEAPFROG2:
        return run_distributed_leapfrog2(g, config, state, **sim_kw)
    raise ValueError(f"no distributed protocol for scheme {config.scheme.value}")


def stats_to_json(history: list[RoundStats]) -> str:
    rows = [{"iter": h.iteration, "packets": h.packets, "messages": h.messages,
             "barriers": h.barriers} for h in history]
    return json.dumps(rows, indent=1)
