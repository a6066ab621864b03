"""``symspec`` command line: spectra, parameters, comparisons, distributed runs, consensus.

Exit codes: 0 success, 1 runtime error, 2 usage error.  Every subcommand is a
pure function of its inputs, flags and seed, so reruns write identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import datasets
from .consensus import best_constant_weight, connected_rgg, consensus_run, estimate_weight
from .distsim import run_distributed, stats_to_json
from .graph import (Graph, MatrixKind, is_connected, lambda_max_bound, largest_connected_component,
                    load_graph, max_degree)
from .integrators import (DivergenceError, ParamBudgetError, RunConfig, Scheme, StageCoefficients,
                          choose_params, init_state)
from .integrators import run as integrate
from .spectral import eigenpairs_to_json, run_pipeline, spectrum_to_csv

DEFAULT_BUDGET = 4096
NORM_WARN = 10.0


class CliError(Exception):
    pass


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _smoothing(text: str):
    if text == "auto":
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number >= 0 or 'auto'") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError("smoothing variance must be >= 0")
    return v


def _positive(kind):
    def parse(text):
        try:
            val = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} {text!r}") from None
        if not val > 0:
            raise argparse.ArgumentTypeError("must be > 0")
        return val
    return parse


def _fraction(text: str) -> float:
    val = float(text)
    if not 0 <= val <= 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return val


# -- graph and parameter resolution -----------------------------------------------


def load_input(spec: str, fmt: str | None = None, lcc: bool = False, offline: bool = False) -> Graph:
    """A file path, or the name of a benchmark dataset (``lesmis``, ``netscience``, ``enron``)."""
    if not os.path.exists(spec) and spec in datasets.DATASETS:
        g = datasets.load_dataset(spec, offline=offline)
    else:
        g = load_graph(spec, fmt)
    return largest_connected_component(g) if lcc else g


def _resolve_probe(g: Graph, probe: str | None) -> int | None:
    if probe is None:
        return None
    try:
        return g.node_index(probe)
    except (KeyError, ValueError) as exc:
        raise CliError(f"unknown probe node {probe!r}") from exc


def _run_params(g: Graph, args) -> tuple[float, int]:
    bound = lambda_max_bound(g, MatrixKind(args.matrix))
    if bound <= 0:
        raise CliError("graph has no edges: lambda_max bound is 0")
    eps = args.eps if args.eps is not None else args.safety * math.pi / bound
    if args.samples is not None:
        return eps, args.samples
    s = max(2, math.ceil(2 * math.pi / (eps * args.lambda_diff) * (1 - 1e-12)))
    return eps, s


def _config(g: Graph, args, scheme: str | None = None, **over) -> RunConfig:
    eps, s = _run_params(g, args)
    probe = _resolve_probe(g, args.probe)
    kw = dict(scheme=scheme or args.scheme, eps=eps, samples=s, matrix=args.matrix,
              v=args.smoothing_v, seed=args.seed, threshold=args.threshold, part=args.part,
              detect_at=probe, coefficients=args.coefficients,
              dispersion_correction=not args.no_dispersion_correction)
    kw.update(over)
    try:
        return RunConfig(**kw)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _label(g: Graph, u: int) -> str:
    return str(g.label(int(u)))


# -- subcommands --------------------------------------------------------------------


def cmd_spectrum(args, peaks_only: bool = False) -> int:
    g = load_input(args.graph, args.input_format, args.lcc, args.offline)
    cfg = _config(g, args)
    runner = None
    if args.distributed:
        def runner(g_, c_, s_):
            return run_distributed(g_, c_, s_, check_locality=args.check_locality)[0]
    try:
        res = run_pipeline(g, cfg, runner=runner)
    except DivergenceError as exc:
        print(f"warning: diverging trajectory: {exc}; no spectrum produced", file=sys.stderr)
        return 1
    spec = res.spectrum
    growth = res.trajectory.max_norm_ratio
    summary = {
        "graph": {"n": g.n, "m": g.m},
        "scheme": cfg.scheme.value, "eps": cfg.eps, "samples": cfg.samples,
        "smoothing_v": spec.v, "resolution": 2 * math.pi / (cfg.samples * cfg.eps),
        "grid_spacing": spec.spacing, "threshold": cfg.threshold,
        "probe": None if cfg.detect_at is None else _label(g, cfg.detect_at),
        "max_norm_ratio": None if math.isnan(growth) else growth,
    }
    warn = (not math.isnan(growth)) and growth > NORM_WARN
    if warn:
        summary["warning"] = f"diverging trajectory: norm grew by {growth:.3g}"

    out, fmt = args.out, args.format
    if out:
        if fmt in (None, "csv") and not peaks_only:
            nodes = None if cfg.detect_at is None else [cfg.detect_at]
            with open(out + ".csv" if fmt is None else out, "w") as fh:
                spectrum_to_csv(spec, fh, nodes)
        if fmt in (None, "json"):
            doc = eigenpairs_to_json(res.eigenpairs, vectors=not peaks_only, **summary)
            with open(out + ".json" if fmt is None else out, "w") as fh:
                fh.write(doc + "\n")
    elif fmt == "json":
        sys.stdout.write(eigenpairs_to_json(res.eigenpairs, vectors=not peaks_only, **summary) + "\n")
        return 0

    print(f"# n={g.n} m={g.m} scheme={cfg.scheme.value} eps={cfg.eps:.6g} samples={cfg.samples} "
          f"v={spec.v:.4g} resolution={summary['resolution']:.4g}")
    if warn:
        print(f"# WARNING: {summary['warning']}")
    print(f"{'lambda':>14} {'theta':>14} {'peak':>12}")
    for e in res.eigenpairs:
        print(f"{e.value:14.8f} {e.theta:14.8f} {e.peak:12.5g}")
    return 0


def cmd_peaks(args) -> int:
    return cmd_spectrum(args, peaks_only=True)


def cmd_trajectory(args) -> int:
    g = load_input(args.graph, args.input_format, args.lcc, args.offline)
    cfg = _config(g, args)
    probes = () if cfg.detect_at is None else (cfg.detect_at,)
    cfg = cfg.with_(probe_nodes=probes)
    state = init_state(g.n, cfg.seed, cfg.init)
    try:
        if args.distributed:
            traj = run_distributed(g, cfg, state, check_locality=args.check_locality)[0]
        else:
            traj = integrate(g, cfg, state, track_energy=True)
    except DivergenceError as exc:
        print(f"warning: diverging trajectory: {exc}", file=sys.stderr)
        return 1
    if args.format == "json":
        doc = {"scheme": cfg.scheme.value, "eps": cfg.eps, "samples": cfg.samples,
               "max_norm_ratio": None if traj.norm_ratio is None else traj.max_norm_ratio,
               "energy_drift": None if traj.energy is None else traj.energy_drift()}
        text = _dumps(doc)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.out:
        with open(args.out, "w") as fh:
            traj.to_csv(fh)
    else:
        traj.to_csv(sys.stdout)
    return 0


def cmd_params(args) -> int:
    g = load_input(args.graph, args.input_format, args.lcc, args.offline)
    kind = MatrixKind(args.matrix)
    bound = lambda_max_bound(g, kind)
    if bound <= 0:
        raise CliError("graph has no edges: lambda_max bound is 0")
    doc = {"n": g.n, "m": g.m, "max_degree": max_degree(g), "lambda_max_bound": bound,
           "safety": args.safety, "lambda_diff": args.lambda_diff, "budget": args.budget}
    try:
        p = choose_params(bound, args.lambda_diff, args.safety, args.budget)
        doc.update(eps=p.eps, samples=p.samples, resolution=p.resolution, within_budget=True)
    except ParamBudgetError as exc:
        eps = args.safety * math.pi / bound
        doc.update(eps=eps, samples=exc.samples, resolution=args.lambda_diff,
                   within_budget=False, achievable_resolution=exc.achievable)
        print(f"warning: {exc}", file=sys.stderr)
    if args.format == "json":
        sys.stdout.write(_dumps(doc))
    else:
        for k in sorted(doc):
            print(f"{k}: {doc[k]}")
    return 0


def _oracle(g: Graph, kind: MatrixKind) -> np.ndarray:
    return np.linalg.eigvalsh(g.to_dense(kind))


def match_count(estimates, oracle, tol: float, k: int) -> int:
    """How many of the ``k`` smallest distinct oracle eigenvalues have an estimate within ``tol``."""
    distinct = np.unique(np.round(oracle, 9))[:k]
    est = np.asarray(estimates, dtype=float)
    if not len(est):
        return 0
    return int(sum(np.min(np.abs(est - lam)) <= tol for lam in distinct))


def cmd_compare(args) -> int:
    if len(args.schemes) < 2:
        raise CliError("compare needs at least two schemes")
    g = load_input(args.graph, args.input_format, args.lcc, args.offline)
    kind = MatrixKind(args.matrix)
    oracle = _oracle(g, kind) if g.n <= args.oracle_max_n else None
    rows = {}
    series = {}
    for name in args.schemes:
        cfg = _config(g, args, scheme=name)
        if Scheme(name) is Scheme.LEAPFROG2 and kind is not MatrixKind.LAPLACIAN:
            raise CliError("leapfrog2 needs the Laplacian")
        row = {"eps": cfg.eps, "samples": cfg.samples}
        try:
            res = run_pipeline(g, cfg, track_energy=True)
        except DivergenceError as exc:
            row.update(diverged=True, step=exc.step)
            rows[name] = row
            continue
        traj = res.trajectory
        tol = 0.5 * res.spectrum.spacing
        row.update(diverged=False, peaks=len(res.eigenpairs),
                   max_norm_ratio=None if traj.norm_ratio is None else traj.max_norm_ratio,
                   energy_drift=None if traj.energy is None else traj.energy_drift())
        if oracle is not None:
            row["matched_smallest"] = match_count(res.values, oracle, tol, args.k)
            row["k"] = args.k
        rows[name] = row
        if traj.norm_ratio is not None:
            series[name] = traj.norm_ratio
    doc = {"n": g.n, "m": g.m, "schemes": rows}
    if args.out and series:
        names = sorted(series)
        with open(args.out, "w") as fh:
            fh.write("step," + ",".join(f"{nm}_norm_ratio" for nm in names) + "\n")
            length = min(len(series[nm]) for nm in names)
            for i in range(length):
                fh.write(f"{i}," + ",".join(repr(float(series[nm][i])) for nm in names) + "\n")
    sys.stdout.write(_dumps(doc))
    return 0


def cmd_distsim(args) -> int:
    g = load_input(args.graph, args.input_format, args.lcc, args.offline)
    cfg = _config(g, args)
    if cfg.scheme not in (Scheme.SI2, Scheme.LEAPFROG2):
        raise CliError("distributed simulation supports si2 and leapfrog2")
    traj, history, sim = run_distributed(g, cfg, check_locality=args.check_locality,
                                         order_seed=args.order_seed, workers=args.workers)
    doc = {"n": g.n, "m": g.m, "scheme": cfg.scheme.value, "iterations": len(history),
           "packets_per_iteration": history[0].packets if history else 0,
           "barriers_per_iteration": history[0].barriers if history else 0,
           "total_packets": sim.packets, "total_messages": sim.messages,
           "total_barriers": sim.barriers, "global_reductions": sim.global_reductions}
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(stats_to_json(history) + "\n")
    sys.stdout.write(_dumps(doc))
    return 0


def cmd_consensus(args) -> int:
    if args.graph:
        g = load_input(args.graph, args.input_format, args.lcc, args.offline)
        if not is_connected(g):
            raise CliError("consensus needs a connected graph")
        seed_used = None
    else:
        g, seed_used, _ = connected_rgg(args.n, args.radius, args.seed)
    if args.oracle:
        lam = _oracle(g, MatrixKind.LAPLACIAN)
        w = best_constant_weight(lam[-1], lam[1])
    else:
        w = estimate_weight(g, args.lambda_diff, args.safety, args.seed, args.threshold).w
    m = np.random.default_rng(args.seed).random(g.n)
    run = consensus_run(g, w, m, args.tol, args.max_steps)
    doc = {"w": w, "steps_to_converge": run.steps if run.converged else None,
           "final_error": run.final_error}
    if seed_used is not None:
        doc["graph_seed"] = seed_used
    sys.stdout.write(_dumps(doc))
    return 0 if run.converged else 1


def cmd_fetch(args) -> int:
    for name in args.names:
        path = datasets.fetch(name, offline=args.offline)
        g = datasets.load_dataset(name, offline=args.offline)
        print(f"{name}: {path} n={g.n} m={g.m}")
    return 0


# -- parser -------------------------------------------------------------------------


def _graph_args(p, optional: bool = False):
    if optional:
        p.add_argument("--graph", help="graph file or dataset name (default: random geometric graph)")
    else:
        p.add_argument("graph", help="edge list / GML file, or dataset name (lesmis, netscience, enron)")
    p.add_argument("--input-format", choices=["edgelist", "gml"], default=None,
                   help="input format (default: from extension)")
    p.add_argument("--lcc", action="store_true", help="restrict to the largest connected component")
    p.add_argument("--offline", action="store_true", help="never download datasets")


def _run_args(p, scheme: bool = True):
    if scheme:
        p.add_argument("--scheme", choices=[s.value for s in Scheme], default="si4",
                       help="time integrator (default: si4)")
    p.add_argument("--matrix", choices=[k.value for k in MatrixKind], default="laplacian",
                   help="operator whose spectrum is estimated")
    p.add_argument("--eps", type=_positive(float), default=None,
                   help="step size (default: safety * pi / lambda_max bound)")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--samples", type=_positive(int), default=None, help="number of samples s")
    grp.add_argument("--lambda-diff", type=_positive(float), default=0.05,
                     help="target resolution; sets s = ceil(2 pi / (eps lambda_diff)) (default 0.05)")
    p.add_argument("--safety", type=_positive(float), default=0.5,
                   help="fraction of the band edge used for eps (default 0.5)")
    p.add_argument("--smoothing-v", type=_smoothing, default=None,
                   help="Gaussian window variance v, or 'auto' (default auto)")
    p.add_argument("--seed", type=int, default=0, help="seed of the random initial state")
    p.add_argument("--probe", default=None,
                   help="node label or index scanned for peaks and exported (default: all nodes)")
    p.add_argument("--threshold", type=_fraction, default=0.05,
                   help="peak threshold relative to the band maximum (default 0.05)")
    p.add_argument("--part", choices=["real", "abs"], default="real", help="spectrum part scanned")
    p.add_argument("--coefficients", choices=StageCoefficients.available(), default=None,
                   help="stage coefficients for si4")
    p.add_argument("--no-dispersion-correction", action="store_true",
                   help="map frequencies to eigenvalues with the continuous-time relation")
    p.add_argument("--distributed", action="store_true", help="run through the message-passing simulator")
    p.add_argument("--check-locality", action="store_true", help="enforce node locality (slow)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symspec", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="estimate eigenpairs; write spectrum CSV and eigenpair JSON")
    _graph_args(p)
    _run_args(p)
    p.add_argument("--out", default=None, help="output path (prefix for .csv/.json when --format is unset)")
    p.add_argument("--format", choices=["csv", "json"], default=None, help="write only this format")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("peaks", help="eigenvalue estimates only (no vectors, no spectrum file)")
    _graph_args(p)
    _run_args(p)
    p.add_argument("--out", default=None, help="JSON output path")
    p.add_argument("--format", choices=["json"], default=None, help="print JSON instead of a table")
    p.set_defaults(func=cmd_peaks)

    p = sub.add_parser("trajectory", help="raw trajectory samples (CSV) or norm/energy summary (JSON)")
    _graph_args(p)
    _run_args(p)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv",
                   help="csv: samples (time,node,re,im); json: norm and energy summary")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("params", help="recommended eps and s for a target resolution")
    _graph_args(p)
    p.add_argument("--matrix", choices=[k.value for k in MatrixKind], default="laplacian",
                   help="operator whose spectral radius is bounded")
    p.add_argument("--lambda-diff", type=_positive(float), required=True, help="target resolution")
    p.add_argument("--safety", type=_positive(float), default=0.5, help="fraction of the band edge")
    p.add_argument("--budget", type=_positive(int), default=DEFAULT_BUDGET,
                   help=f"sample budget that triggers a warning (default {DEFAULT_BUDGET})")
    p.add_argument("--format", choices=["text", "json"], default="text", help="output format")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("compare", help="run several schemes with equal budgets against a dense oracle")
    _graph_args(p)
    _run_args(p, scheme=False)
    p.add_argument("--schemes", nargs="+", choices=[s.value for s in Scheme], default=["leapfrog2", "si2"],
                   help="schemes to compare (at least two)")
    p.add_argument("--k", type=_positive(int), default=5, help="smallest oracle eigenvalues to match")
    p.add_argument("--oracle-max-n", type=int, default=2000, help="skip the dense oracle above this n")
    p.add_argument("--out", default=None, help="CSV of per-step norm ratios")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("distsim", help="message-passing run with packet and barrier counts")
    _graph_args(p)
    _run_args(p)
    p.set_defaults(scheme="si2")
    p.add_argument("--order-seed", type=int, default=None, help="shuffle node execution order")
    p.add_argument("--workers", type=_positive(int), default=1, help="threads per phase")
    p.add_argument("--out", default=None, help="per-iteration stats JSON")
    p.set_defaults(func=cmd_distsim)

    p = sub.add_parser("consensus", help="self-tuned best-constant consensus on a geometric graph")
    _graph_args(p, optional=True)
    p.add_argument("--n", type=_positive(int), default=50, help="RGG node count")
    p.add_argument("--radius", type=_positive(float), default=0.3, help="RGG connection radius")
    p.add_argument("--seed", type=int, default=0, help="seed for graph, initial values and run")
    p.add_argument("--lambda-diff", type=_positive(float), default=0.05, help="spectral resolution target")
    p.add_argument("--safety", type=_positive(float), default=0.5, help="fraction of the band edge")
    p.add_argument("--threshold", type=_fraction, default=1e-3, help="relative peak threshold")
    p.add_argument("--tol", type=_positive(float), default=1e-8, help="convergence tolerance")
    p.add_argument("--max-steps", type=_positive(int), default=100_000, help="consensus step limit")
    p.add_argument("--oracle", action="store_true", help="use dense eigenvalues instead of the pipeline")
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("fetch", help="download and verify benchmark datasets")
    p.add_argument("names", nargs="+", choices=sorted(datasets.DATASETS), help="datasets to fetch")
    p.add_argument("--offline", action="store_true", help="only look in local paths")
    p.set_defaults(func=cmd_fetch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
