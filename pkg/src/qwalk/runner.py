"""Run, sweep and compare experiments; CSV and manifest output."""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig, parse_config
from .errors import ConfigError, FitError
from .graphs import HypercubeSpec, HyperlatticeSpec, build_hypercube, build_hyperlattice, hamiltonian_sparse
from .lindblad import (
    IntegratorConfig, Trajectory, build_qubit_dephasing, build_site_projectors, evolve,
    localized_state, offdiag_decay_rates, uniform_superposition, unitary_evolve,
)
from .observables import (
    ClassicalCTRWSpec, ObservableSeries, classical_ctrw_evolve, exponent_fit, observable_set,
)
from .spin_bath import QuadratureSpec, SpinBathSpec, spinbath_distribution

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
SERIES_OBSERVABLES = ("p_origin", "p_far", "msd")


def time_grid(cfg: ExperimentConfig) -> np.ndarray:
    t = cfg.time
    if t.grid == "linear":
        return np.linspace(0.0, t.t_max, t.num_points)
    t_min = t.t_min if t.t_min is not None else t.t_max / 1000.0
    return np.geomspace(t_min, t.t_max, t.num_points)


def build_graph(cfg: ExperimentConfig):
    m = cfg.model
    if m.kind == "hypercube":
        return build_hypercube(HypercubeSpec(m.D, m.delta0))
    return build_hyperlattice(HyperlatticeSpec(m.d, m.delta0, m.L))


def _integrator(cfg: ExperimentConfig) -> IntegratorConfig:
    s = cfg.integrator
    return IntegratorConfig(s.method, s.abs_tol, s.rel_tol, s.max_step, s.renormalize_trace)


def _jumps(cfg, graph):
    dec = cfg.decoherence
    if dec.kind == "site":
        return build_site_projectors(graph, dec.gamma)
    return build_qubit_dephasing(cfg.model.D, dec.gamma)


def _with_origin(grid):
    # engines start from the initial state at t = 0
    if grid[0] > 0:
        return np.concatenate([[0.0], grid]), 1
    return grid, 0


def simulate(cfg: ExperimentConfig, graph=None) -> Trajectory:
    """Population trajectory on the configured time grid."""
    graph = graph or build_graph(cfg)
    grid, skip = _with_origin(time_grid(cfg))
    n = graph.num_nodes
    origin = graph.origin
    kind = cfg.decoherence.kind
    if kind == "none":
        psi0 = np.zeros(n, dtype=complex)
        psi0[origin] = 1.0
        traj = unitary_evolve(psi0, hamiltonian_sparse(graph), grid)
    elif kind in ("site", "qubit"):
        traj = evolve(localized_state(n, origin), hamiltonian_sparse(graph), _jumps(cfg, graph), grid,
                      _integrator(cfg), store_states=False, check_positivity=n <= 16)
    elif kind == "classical":
        rate = cfg.decoherence.rate if cfg.decoherence.rate is not None else abs(cfg.model.delta0)
        traj = classical_ctrw_evolve(ClassicalCTRWSpec(graph, rate), np.eye(n)[origin], grid)
    else:
        dec = cfg.decoherence
        spec = SpinBathSpec(cfg.model.d, cfg.model.delta0, dec.lam, QuadratureSpec(num_points=dec.quadrature_points))
        vecs = graph.lattice_vectors()
        pops = np.array([spinbath_distribution(vecs, 2.0 * abs(spec.delta0) * t, spec) for t in grid])
        traj = Trajectory(grid, pops, None, {"method": "phase-average", "rule": spec.quadrature.rule})
    if skip:
        traj = Trajectory(traj.times[skip:], traj.populations[skip:], None, traj.diagnostics)
    return traj


def _decay_rates(cfg: ExperimentConfig, graph):
    n = graph.num_nodes
    grid = np.linspace(0.0, cfg.time.t_max, cfg.time.num_points)
    zero_h = hamiltonian_sparse(graph) * 0.0
    traj = evolve(uniform_superposition(n), zero_h, _jumps(cfg, graph), grid, _integrator(cfg), store_states=True)
    return offdiag_decay_rates(traj)


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x):
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Execute one experiment and write CSVs plus ``manifest.json``."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    graph = build_graph(cfg)
    traj = simulate(cfg, graph)
    files = []
    series = observable_set(traj, graph, [o for o in cfg.observables if o in SERIES_OBSERVABLES])
    for name in cfg.observables:
        if name in series:
            path = out / f"{name}.csv"
            series[name].to_csv(path)
            files.append(path.name)
        elif name == "distribution":
            path = out / "distribution.csv"
            traj.to_csv(path)
            files.append(path.name)
        elif name == "offdiag_rates":
            rates = _decay_rates(cfg, graph)
            path = out / "offdiag_rates.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["m", "n", "hamming", "rate"])
                for (m, k), r in sorted(rates.rates.items()):
                    w.writerow([m, k, bin(m ^ k).count("1"), _fmt(r)])
            files.append(path.name)
    manifest = {
        "tool": "qwalk",
        "version": __version__,
        "config": cfg.model_dump(mode="json"),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "num_nodes": graph.num_nodes,
        "num_times": int(traj.times.size),
        "outputs": files,
        "diagnostics": _jsonable(traj.diagnostics),
    }
    _write_atomic(out / MANIFEST, json.dumps(manifest, indent=2))
    logger.info("wrote %s", out)
    return out


# sweeps

def set_path(doc: dict, dotted: str, value):
    """Return a copy of ``doc`` with the dotted field replaced."""
    out = copy.deepcopy(doc)
    node = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "is not a config path")
    node[parts[-1]] = value
    return out


def parse_values(text: str) -> list:
    """``"0.1,0.5,2"`` -> ``[0.1, 0.5, 2]`` (integers stay integers)."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            out.append(int(item))
        except ValueError:
            try:
                out.append(float(item))
            except ValueError:
                raise ConfigError("values", f"{item!r} is not a number") from None
    return out


def _sweep_one(args):
    doc, out_dir = args
    try:
        cfg = parse_config(doc)
        run_experiment(cfg, out_dir)
        return None
    except Exception as exc:  # reported per value
        return f"{type(exc).__name__}: {exc}"


@dataclass
class SweepResult:
    out_dir: Path
    values: list
    failures: dict = field(default_factory=dict)
    combined: Optional[Path] = None


def sweep(doc: dict, param: str, values, out_dir=None, jobs=1) -> SweepResult:
    """Run one sub-experiment per value of ``param`` and merge the series CSVs."""
    if not values:
        raise ConfigError("values", "empty value list")
    base = parse_config(doc)
    out = Path(out_dir if out_dir is not None else base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    leaf = param.split(".")[-1]
    tasks = []
    for v in values:
        sub = set_path(doc, param, v)
        tasks.append((sub, str(out / f"{leaf}={v}")))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    failures = {v: err for v, err in zip(values, results) if err is not None}
    combined = out / "sweep.csv"
    with open(combined, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([leaf, "observable", "t", "value"])
        for v, (sub, sub_dir) in zip(values, tasks):
            if v in failures:
                continue
            for name in base.observables:
                path = Path(sub_dir) / f"{name}.csv"
                if name not in SERIES_OBSERVABLES or not path.exists():
                    continue
                with open(path, encoding="utf-8") as src:
                    rows = csv.reader(src)
                    next(rows)
                    for t, val in rows:
                        w.writerow([v, name, t, val])
    summary = {
        "param": param,
        "values": values,
        "runs": {str(v): ("failed: " + failures[v]) if v in failures else "ok" for v in values},
    }
    _write_atomic(out / "sweep_manifest.json", json.dumps(summary, indent=2))
    return SweepResult(out, list(values), failures, combined)


# comparison

def _read_series(run_dir: Path, name):
    data = np.loadtxt(run_dir / f"{name}.csv", delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


@dataclass
class ObservableComparison:
    name: str
    max_abs_dev: float
    mean_abs_dev: float
    ratio_mean: Optional[float]
    ratio_min: Optional[float]
    ratio_max: Optional[float]
    exponent_a: Optional[float]
    exponent_b: Optional[float]


def compare_runs(dir_a, dir_b, window=None):
    """Per-observable deviations, ratios (a / b) and log-log exponents of two runs.

    Raises:
        ValueError: missing manifest, no shared observables or mismatched grids.
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    man = []
    for d in (dir_a, dir_b):
        try:
            man.append(json.loads((d / MANIFEST).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise ValueError(f"no {MANIFEST} in {d}") from None
    shared = [o for o in man[0]["outputs"] if o in man[1]["outputs"]]
    names = [Path(o).stem for o in shared if Path(o).stem in SERIES_OBSERVABLES]
    if not names:
        raise ValueError("runs share no time-series observables")
    out = []
    for name in names:
        ta, va = _read_series(dir_a, name)
        tb, vb = _read_series(dir_b, name)
        if ta.shape != tb.shape or np.any(ta != tb):
            raise ValueError(f"time grids differ for {name}")
        dev = np.abs(va - vb)
        ok = (np.abs(vb) > 1e-300) & (ta > 0)
        ratio = va[ok] / vb[ok]
        win = window or (ta[-1] / 4.0, ta[-1])
        exps = []
        for t, v in ((ta, va), (tb, vb)):
            try:
                exps.append(exponent_fit(ObservableSeries(t, v, name), win).exponent)
            except FitError:
                exps.append(None)
        out.append(ObservableComparison(
            name, float(dev.max()), float(dev.mean()),
            float(ratio.mean()) if ratio.size else None,
            float(ratio.min()) if ratio.size else None,
            float(ratio.max()) if ratio.size else None,
            exps[0], exps[1],
        ))
    return out
