"""Derived quantities: distributions, MSD, exponent fits, classical reference walks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .errors import FitError
from .graphs import Graph, hamiltonian_sparse
from .lindblad import IntegratorConfig, Trajectory, build_site_projectors, evolve, localized_state

PROB_TOL = 1e-8


@dataclass
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    label: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, label=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], label or str(path))


def distribution_at(source, t, interpolate=False, atol=1e-12):
    """Node occupations at time ``t``.

    Args:
        source: a Trajectory, or any model with a ``distribution(t)`` method.
        t: time.
        interpolate: allow linear interpolation between trajectory samples.

    Raises:
        ValueError: ``t`` is not a grid time and interpolation is off.
    """
    if not isinstance(source, Trajectory):
        p = np.asarray(source.distribution(t), dtype=float)
    else:
        times = source.times
        hit = np.flatnonzero(np.abs(times - t) <= atol * max(1.0, abs(t)))
        if hit.size:
            p = source.populations[hit[0]]
        elif interpolate and times[0] <= t <= times[-1]:
            k = int(np.searchsorted(times, t)) - 1
            w = (t - times[k]) / (times[k + 1] - times[k])
            p = (1 - w) * source.populations[k] + w * source.populations[k + 1]
        else:
            raise ValueError(f"t={t:g} is not on the trajectory grid")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"distribution sums to {p.sum():.12g}")
    return p


def mean_square_displacement(dist, labels):
    """``sum_n |n|^2 P_n``; ``dist`` may be a vector or a (time, node) array."""
    if labels is None:
        raise ValueError("mean-square displacement needs lattice labels")
    if isinstance(labels, Graph):
        labels = labels.lattice_vectors()
    r2 = np.sum(np.asarray(labels, dtype=float) ** 2, axis=1)
    return np.asarray(dist) @ r2


@dataclass(frozen=True)
class ClassicalCTRWSpec:
    graph: Graph
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("classical hop rate must be positive")


def ctrw_generator(spec: ClassicalCTRWSpec):
    """Rate matrix ``rate * (A - diag(deg))`` acting on probability vectors."""
    g = spec.graph
    a = g.adjacency()
    a.data[:] = 1.0
    deg = np.asarray(a.sum(axis=1)).ravel()
    return (spec.rate * (a - sparse.diags(deg))).tocsr()


def classical_ctrw_evolve(spec: ClassicalCTRWSpec, p0, t_grid) -> Trajectory:
    """Exact continuous-time random walk ``dP/dt = rate (A - deg) P`` sampled on ``t_grid``."""
    gen = ctrw_generator(spec)
    p = np.asarray(p0, dtype=float)
    if p.shape != (spec.graph.num_nodes,) or np.any(p < 0) or abs(p.sum() - 1) > PROB_TOL:
        raise ValueError("p0 must be a probability vector over the graph nodes")
    t_grid = np.asarray(t_grid, dtype=float)
    pops = np.empty((t_grid.size, p.size))
    pops[0] = p
    for k in range(1, t_grid.size):
        p = expm_multiply(gen * (t_grid[k] - t_grid[k - 1]), p)
        if p.min() < -1e-12:
            raise FloatingPointError(f"negative classical probability at t={t_grid[k]:g}")
        p = np.clip(p, 0.0, None)
        pops[k] = p
    return Trajectory(t_grid, pops, None, {"method": "expm_multiply", "rate": spec.rate})


def observable_set(traj: Trajectory, graph: Graph, names=("p_origin", "p_far", "msd")):
    """Standard series for a trajectory; names not applicable to the graph are skipped."""
    out = {}
    for name in names:
        if name == "p_origin":
            out[name] = ObservableSeries(traj.times, traj.populations[:, graph.origin], name)
        elif name == "p_far" and graph.kind == "hypercube":
            out[name] = ObservableSeries(traj.times, traj.populations[:, graph.far_corner], name)
        elif name == "msd" and graph.kind == "hyperlattice":
            out[name] = ObservableSeries(traj.times, mean_square_displacement(traj.populations, graph), name)
    return out


def running_average(times, values, period):
    """Centred moving average over ``period`` (trapezoid cumulative integral).

    Returns the times whose full window lies inside the data, and the averages.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    keep = (t - period / 2 >= t[0]) & (t + period / 2 <= t[-1])
    tc = t[keep]
    avg = (np.interp(tc + period / 2, t, cum) - np.interp(tc - period / 2, t, cum)) / period
    return tc, avg


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    residual: float
    prefactor: float
    num_points: int


def exponent_fit(series: ObservableSeries, window=None, envelope_period=None) -> ExponentFit:
    """Least-squares slope of ``log value`` against ``log t`` inside ``window``.

    ``envelope_period`` first replaces the data by its running average over
    that period, which removes Bessel oscillations of the quantum return
    probability (use ``pi / (2 delta0)``).
    """
    t, v = series.times, series.values
    if envelope_period is not None:
        t, v = running_average(t, v, envelope_period)
    if window is not None:
        lo, hi = window
        sel = (t >= lo) & (t <= hi)
        t, v = t[sel], v[sel]
    if t.size < 2:
        raise FitError("fewer than two points in the fit window")
    if np.any(v <= 0) or np.any(t <= 0):
        raise FitError("log-log fit needs positive times and values")
    x, y = np.log(t), np.log(v)
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / t.size) if res.size else 0.0
    return ExponentFit(float(coef[0]), rms, float(math.exp(coef[1])), int(t.size))


@dataclass
class ZenoScan:
    gammas: np.ndarray
    p_origin: np.ndarray
    t_probe: float

    @property
    def argmin(self):
        return int(np.argmin(self.p_origin))

    @property
    def interior_minimum(self):
        return 0 < self.argmin < len(self.gammas) - 1

    def as_series(self):
        return ObservableSeries(self.gammas, self.p_origin, f"p_origin(t={self.t_probe:g})")


def zeno_scan(graph: Graph, gammas, t_probe, origin: Optional[int] = None,
              cfg: Optional[IntegratorConfig] = None) -> ZenoScan:
    """Return probability at ``t_probe`` for site-projector dephasing at each rate."""
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas < 0) or np.any(np.diff(gammas) < 0):
        raise ValueError("gammas must be non-negative and ascending")
    origin = graph.origin if origin is None else origin
    H = hamiltonian_sparse(graph)
    rho0 = localized_state(graph.num_nodes, origin)
    jumps = build_site_projectors(graph)
    vals = []
    for g in gammas:
        traj = evolve(rho0, H, jumps.with_gamma(float(g)), [0.0, t_probe], cfg, store_states=False)
        vals.append(traj.populations[-1, origin])
    return ZenoScan(gammas, np.array(vals), float(t_probe))
