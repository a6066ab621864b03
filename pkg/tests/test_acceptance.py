"""End-to-end acceptance checks, one group per criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.  The co-authorship network must be reachable
(download, ``SYMSPEC_DATA`` or cache); the Enron check needs ``SYMSPEC_LARGE=1``.
"""

import json
import math
import time

import numpy as np
import pytest

from oracle import distinct, eigh, random_graph, schrodinger, small_graphs, spring
from symspec.cli import main as cli_main
from symspec.cli import match_count
from symspec.consensus import connected_rgg, consensus_run, estimate_weight
from symspec.datasets import load_dataset
from symspec.distsim import run_distributed_si2
from symspec.graph import Graph, lambda_max_bound, largest_connected_component
from symspec.integrators import InitMode, RunConfig, choose_params, init_state, run
from symspec.spectral import eigenpairs_to_json, run_pipeline

LESMIS_EPS = math.pi / 72  # = pi / (2 * max degree)
LESMIS_SAMPLES = 65536
FINE_THRESHOLD = 1e-3


def desk_config(g, scheme, seed=0):
    eps, s, _ = choose_params(lambda_max_bound(g), 0.05)
    return RunConfig(scheme, eps, s, seed=seed, threshold=FINE_THRESHOLD)


def lesmis_config(scheme, samples=LESMIS_SAMPLES, seed=0):
    return RunConfig(scheme, LESMIS_EPS, samples, seed=seed, threshold=FINE_THRESHOLD)


@pytest.fixture(scope="module")
def lesmis_runs(lesmis_graph):
    runs = {}
    for scheme in ("leapfrog2", "si2", "si4"):
        t = time.perf_counter()
        runs[scheme] = run_pipeline(lesmis_graph, lesmis_config(scheme))
        runs[scheme].elapsed = time.perf_counter() - t
    t = time.perf_counter()
    runs["si4_quarter"] = run_pipeline(lesmis_graph, lesmis_config("si4", LESMIS_SAMPLES // 4))
    runs["si4_quarter"].elapsed = time.perf_counter() - t
    return runs


# -- 1. dataset fidelity ---------------------------------------------------------------


@pytest.mark.criterion(1)
def test_c1_lesmis(note):
    g = load_dataset("lesmis")
    note(f"lesmis n={g.n} m={g.m}")
    assert (g.n, g.m) == (77, 254)


@pytest.mark.criterion(1)
def test_c1_netscience(note):
    g = load_dataset("netscience")
    note(f"netscience lcc n={g.n} m={g.m}")
    assert (g.n, g.m) == (379, 914)


@pytest.mark.criterion(1)
@pytest.mark.large
def test_c1_enron(note):
    g = load_dataset("enron")
    note(f"enron lcc n={g.n} m={g.m}")
    assert (g.n, g.m) == (33696, 180811)


# -- 2. eigenvalue recovery --------------------------------------------------------


@pytest.mark.criterion(2)
@pytest.mark.parametrize("scheme", ["si2", "si4"])
def test_c2_small_graphs(scheme, note):
    worst = 0.0
    for name, g in small_graphs().items():
        res = run_pipeline(g, desk_config(g, scheme))
        lam = distinct(eigh(g)[0])
        h = res.spectrum.spacing / 2
        errs = [np.min(np.abs(lam - e)) / h for e in res.values]
        worst = max(worst, max(errs))
        assert max(errs) <= 1, (name, res.values, lam)
    note(f"{scheme} small graphs: worst error {worst:.3f} half-bins")


@pytest.mark.criterion(2)
@pytest.mark.parametrize("scheme", ["si2", "si4"])
def test_c2_lesmis_all_peaks_on_grid(scheme, lesmis_graph, lesmis_runs, note):
    res = lesmis_runs[scheme]
    lam = eigh(lesmis_graph)[0]
    h = res.spectrum.spacing / 2
    errs = np.array([np.min(np.abs(lam - e)) for e in res.values])
    note(f"lesmis {scheme}: {len(errs)} peaks, {int(np.sum(errs > h))} off-grid")
    assert np.all(errs <= h)


@pytest.mark.criterion(2)
def test_c2_lesmis_five_smallest_si4(lesmis_graph, lesmis_runs, note):
    res = lesmis_runs["si4"]
    cfg = res.config
    assert cfg.eps * lambda_max_bound(lesmis_graph) <= math.pi * (1 + 1e-12)
    lam = distinct(eigh(lesmis_graph)[0])
    assert 2 * math.pi / (cfg.samples * cfg.eps) <= np.min(np.diff(lam[:6]))
    got = match_count(res.values, lam, res.spectrum.spacing / 2, 5)
    note(f"si4 matched {got}/5 smallest in {res.elapsed:.1f}s")
    assert got == 5
    assert res.elapsed < 60


# -- 3. eigenvector recovery -------------------------------------------------------


def vector_checks(g, res):
    lam, u = eigh(g)
    h = res.spectrum.spacing / 2
    worst_cos, zero_dist, checked = 1.0, None, 0
    for e in res.eigenpairs:
        hits = np.flatnonzero(np.abs(lam - e.value) <= h)
        if len(hits) != 1:
            continue
        j = hits[0]
        if np.sum(np.abs(lam - lam[j]) < 1e-9) > 1:
            continue  # repeated eigenvalue: only the eigenspace is defined
        c = abs(e.vector @ u[:, j])
        if abs(lam[j]) < 1e-9:
            zero_dist = 1 - float(e.vector @ (np.ones(g.n) / math.sqrt(g.n)))
        worst_cos = min(worst_cos, c)
        checked += 1
    return worst_cos, zero_dist, checked


@pytest.mark.criterion(3)
def test_c3_small_graph_vectors(note):
    for name, g in small_graphs().items():
        res = run_pipeline(g, desk_config(g, "si4", seed=1))
        worst, zero, checked = vector_checks(g, res)
        assert checked > 0 and worst >= 0.99, name
        assert zero is not None and zero <= 1e-6, (name, zero)
    note("small graphs: all simple eigenvectors |cos| >= 0.99")


@pytest.mark.criterion(3)
def test_c3_lesmis_vectors(lesmis_graph, lesmis_runs, note):
    worst, zero, checked = vector_checks(lesmis_graph, lesmis_runs["si4"])
    note(f"lesmis: {checked} simple eigenvectors, worst |cos| {worst:.10f}, "
         f"zero-mode cosine distance {zero:.2e}")
    assert worst >= 0.99
    assert zero is not None and zero <= 1e-6


# -- 4. integrator order ----------------------------------------------------------


@pytest.mark.criterion(4)
def test_c4_order(note):
    t = time.perf_counter()
    g = largest_connected_component(random_graph(20, 0.2, 3))
    assert g.n <= 30
    state = init_state(g.n, 1, InitMode.GAUSSIAN_BOTH)
    T = 2.0
    ratios = {}
    for scheme in ("leapfrog2", "si2", "si4"):
        errs = []
        for k in range(4):
            steps = 2 ** (k + 5)
            last = run(g, RunConfig(scheme, T / steps, steps + 1), state).samples[-1]
            if scheme == "leapfrog2":
                errs.append(np.linalg.norm(last.real - spring(g, state.x, state.y, T)))
            else:
                xr, yr = schrodinger(g, state.x, state.y, T)
                errs.append(np.linalg.norm(last - (xr + 1j * yr)))
        ratios[scheme] = np.array(errs[:-1]) / np.array(errs[1:])
    elapsed = time.perf_counter() - t
    note("ratios " + ", ".join(f"{k}={np.round(v, 2).tolist()}" for k, v in ratios.items())
         + f" in {elapsed:.2f}s")
    for scheme in ("leapfrog2", "si2"):
        assert np.all((ratios[scheme] >= 3.5) & (ratios[scheme] <= 4.5))
    assert np.all((ratios["si4"] >= 12) & (ratios["si4"] <= 20))
    assert elapsed < 10


# -- 5. stability contrast -------------------------------------------------------


@pytest.mark.criterion(5)
def test_c5_euler_vs_si2(lesmis_graph, note):
    cfg = RunConfig("si2", LESMIS_EPS, 256)
    si2 = run(lesmis_graph, cfg)
    euler = run(lesmis_graph, cfg.with_(scheme="euler"))
    note(f"eps=pi/72 s=256: euler max ratio {euler.max_norm_ratio:.3g}, si2 {si2.max_norm_ratio:.6f}")
    assert euler.max_norm_ratio > 10
    assert si2.max_norm_ratio <= 1.01


@pytest.mark.criterion(5)
def test_c5_si2_energy_drift(lesmis_graph, note):
    T = 200.0
    consts = []
    for k in range(3):
        eps = LESMIS_EPS / 2**k
        tr = run(lesmis_graph, RunConfig("si2", eps, int(round(T / eps)) + 1), track_energy=True)
        consts.append(tr.energy_drift() / eps**2)
    consts = np.array(consts)
    note(f"drift / eps^2 = {np.round(consts, 2).tolist()}")
    assert np.all(np.abs(consts / consts[-1] - 1) < 0.2)


# -- 6. distributed equivalence --------------------------------------------------


@pytest.mark.criterion(6)
def test_c6_random_graphs(note):
    rng = np.random.default_rng(2024)
    for trial in range(100):
        n = int(rng.integers(2, 65))
        g = random_graph(n, float(rng.uniform(0.02, 0.4)), int(rng.integers(1 << 30)))
        if g.m == 0:
            g = Graph.from_edges(n, [(0, n - 1)])
        cfg = RunConfig("si2", 0.5 / g.degrees.max(), 20, seed=trial)
        traj, hist, _ = run_distributed_si2(g, cfg, order_seed=trial)
        ref = run(g, cfg, init_state(g.n, cfg.seed, cfg.init))
        assert traj.samples.tobytes() == ref.samples.tobytes(), trial
        assert all(h.packets == 2 * g.m and h.barriers == 3 for h in hist), trial
    note("100 random graphs bit-identical, 2|E| packets and 3 barriers per iteration")


@pytest.mark.criterion(6)
def test_c6_lesmis(lesmis_graph, note):
    cfg = RunConfig("si2", LESMIS_EPS, 2000, seed=0)
    traj, hist, _ = run_distributed_si2(lesmis_graph, cfg, order_seed=11)
    ref = run(lesmis_graph, cfg)
    assert traj.samples.tobytes() == ref.samples.tobytes()
    assert {h.packets for h in hist} == {2 * lesmis_graph.m}
    assert {h.barriers for h in hist} == {3}
    note(f"lesmis {len(hist)} iterations bit-identical, {2 * lesmis_graph.m} packets/iteration")


# -- 7. scheme comparison --------------------------------------------------------


@pytest.mark.criterion(7)
def test_c7_counts(lesmis_graph, lesmis_runs, note):
    lam = eigh(lesmis_graph)[0]
    counts = {}
    for key in ("leapfrog2", "si2", "si4_quarter"):
        res = lesmis_runs[key]
        tol = res.spectrum.spacing / 2
        counts[key] = {k: match_count(res.values, lam, tol, k) for k in (5, 10, 20, 60)}
    note(f"matched smallest (k=5/10/20/60): {counts}")
    for k in (5, 10, 20, 60):
        assert counts["si2"][k] >= counts["leapfrog2"][k]
    assert counts["si4_quarter"][5] >= counts["si2"][5]


# -- 8. consensus -------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_c8_consensus(note):
    worst_w, worst_sum, rejected = 0.0, 0.0, 0
    seed = 0
    for _ in range(20):
        g, used, rej = connected_rgg(50, 0.3, seed)
        rejected += rej
        seed = used + 1
        lam = np.linalg.eigvalsh(g.to_dense())
        w_oracle = 2 / (lam[-1] + lam[1])
        tuned = estimate_weight(g, seed=used)
        worst_w = max(worst_w, abs(tuned.w / w_oracle - 1))
        m = np.random.default_rng(used).random(g.n)
        res = consensus_run(g, tuned.w, m, tol=1e-8)
        assert res.converged and abs(res.mean - m.mean()) == 0
        rel = np.max(np.abs(res.sums - res.sums[0])) / abs(res.sums[0])
        worst_sum = max(worst_sum, rel)
    note(f"max |w/w*-1| = {worst_w:.2e}, max sum drift {worst_sum:.1e}, {rejected} disconnected samples rejected")
    assert worst_w <= 0.02
    assert worst_sum <= 1e-12


# -- 9. determinism -----------------------------------------------------------------


@pytest.mark.criterion(9)
def test_c9_pipeline_artifacts(lesmis_graph, lesmis_runs, note):
    again = run_pipeline(lesmis_graph, lesmis_config("si4", LESMIS_SAMPLES // 4))
    first = lesmis_runs["si4_quarter"]
    assert eigenpairs_to_json(again.eigenpairs) == eigenpairs_to_json(first.eigenpairs)
    assert again.spectrum.values.tobytes() == first.spectrum.values.tobytes()
    note("pipeline spectrum and eigenpair JSON byte-identical on rerun")


@pytest.mark.criterion(9)
def test_c9_cli_artifacts(tmp_path, capsys, note):
    outputs = []
    for k in range(2):
        prefix = tmp_path / f"r{k}"
        stats = tmp_path / f"stats{k}.json"
        assert cli_main(["spectrum", "lesmis", "--scheme", "si4", "--probe", "Valjean",
                         "--seed", "5", "--out", str(prefix)]) == 0
        assert cli_main(["distsim", "lesmis", "--samples", "50", "--order-seed", str(k),
                         "--out", str(stats)]) == 0
        assert cli_main(["consensus", "--seed", "3"]) == 0
        printed = capsys.readouterr().out
        outputs.append([(tmp_path / f"r{k}.csv").read_bytes(), (tmp_path / f"r{k}.json").read_bytes(),
                        stats.read_bytes(), printed.encode()])
    assert outputs[0] == outputs[1]
    json.loads(outputs[0][1])
    note("CLI spectrum CSV/JSON, distsim stats and consensus JSON byte-identical on rerun")
