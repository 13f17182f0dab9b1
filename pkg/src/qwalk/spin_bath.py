"""Lattice walker strongly coupled to a non-diagonal spin bath.

In the strong-decoherence limit the walker's occupation is the free
propagator phase-averaged over ``z -> z cos(phi)``::

    P_n(z) = (1 / 2 pi) * integral_0^{2 pi} prod_mu J_{n_mu}(z cos phi)^2 dphi

Only that limit is implemented; finite coupling strengths are refused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special

from .bessel import bessel_j_orders
from .closed_form import free_msd
from .errors import QuadratureError

STRONG_COUPLING_MIN = 10.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretisation of the phase average.

    ``rule`` is ``"trapezoid"`` (uniform on the periodic interval) or
    ``"gauss-legendre"``. Points are doubled from ``num_points`` until the
    relative change drops below ``rtol``.
    """

    rule: str = "trapezoid"
    num_points: int = 64
    rtol: float = 1e-8
    atol: float = 1e-15
    max_points: int = 2 ** 22

    def __post_init__(self):
        if self.rule not in ("trapezoid", "gauss-legendre"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.num_points < 64:
            raise ValueError("num_points must be >= 64")

    def nodes(self, npts):
        """Angles and weights (weights sum to 1) for ``npts`` points."""
        if self.rule == "trapezoid":
            phi = 2.0 * np.pi * np.arange(npts) / npts
            return phi, np.full(npts, 1.0 / npts)
        x, w = np.polynomial.legendre.leggauss(npts)
        return np.pi * (x + 1.0), w / 2.0


@dataclass(frozen=True)
class SpinBathSpec:
    """Strong-coupling spin bath on a d-dimensional lattice.

    ``lam`` is the bath strength (mean number of bath spins flipped per hop);
    it only gates validity and must be at least 10.
    """

    d: int
    delta0: float = 1.0
    lam: float = math.inf
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.lam >= STRONG_COUPLING_MIN:
            raise ValueError(
                f"spin-bath results hold only for strong coupling (lam >= {STRONG_COUPLING_MIN:g})"
            )


def _phase_average(func, z, quad: QuadratureSpec):
    """Converged weighted sum of ``func(z cos phi)`` over the phase grid.

    ``func`` maps an array of arguments to an array ``(..., npts)``.
    """
    start = max(quad.num_points, 4 * int(math.ceil(z)) + 64)
    npts = 1 << int(math.ceil(math.log2(start)))
    prev = None
    while npts <= quad.max_points:
        phi, w = quad.nodes(npts)
        cur = func(z * np.cos(phi)) @ w
        if prev is not None and np.all(np.abs(cur - prev) <= quad.rtol * np.abs(cur) + quad.atol):
            return cur, npts
        prev = cur
        npts *= 2
    raise QuadratureError(f"phase average did not converge with {quad.max_points} points at z={z:g}")


def spinbath_distribution(vectors, z, spec: SpinBathSpec):
    """Occupations of the given lattice vectors (shape ``(N, d)``) at time ``z``."""
    if z < 0:
        raise ValueError("z must be non-negative")
    vectors = np.abs(np.atleast_2d(np.asarray(vectors, dtype=int)))
    if vectors.shape[1] != spec.d:
        raise ValueError(f"vectors must have {spec.d} components")
    nmax = int(vectors.max())

    def integrand(args):
        sq = bessel_j_orders(nmax, args) ** 2
        return np.prod(sq[vectors], axis=1)

    vals, _ = _phase_average(integrand, float(z), spec.quadrature)
    return vals


def spinbath_prob(n, z, spec: SpinBathSpec) -> float:
    """Occupation of site ``n`` at dimensionless time ``z = 2 delta0 t``."""
    n = np.atleast_1d(np.asarray(n, dtype=int))
    return float(spinbath_distribution(n[None, :], z, spec)[0])


def spinbath_msd(d, delta0, t):
    """Mean-square displacement: phase average of the free result, exactly half of it."""
    # <cos^2 phi> over a full period is 1/2
    return 0.5 * free_msd(d, delta0, t)


def spinbath_msd_lattice(z, spec: SpinBathSpec, nmax=None):
    """Brute-force ``sum_n |n|^2 P_n(z)`` over the box ``|n_mu| <= nmax`` (default 4z + 10)."""
    if nmax is None:
        nmax = int(math.ceil(4 * z)) + 10
    orders = np.arange(-nmax, nmax + 1)

    def moments(args):
        sq = bessel_j_orders(nmax, args) ** 2
        full = sq[np.abs(orders)]
        return np.stack([full.sum(axis=0), (orders[:, None] ** 2 * full).sum(axis=0)])

    # per-axis sums factorise at fixed phase: sum |n|^2 prod_mu P_mu = d * m2 * m0^(d-1)
    d = spec.d

    def integrand(args):
        m0, m2 = moments(args)
        return np.stack([m0 ** d, d * m2 * m0 ** (d - 1)])

    (norm, msd), _ = _phase_average(integrand, float(z), spec.quadrature)
    return float(msd), float(norm)


@dataclass(frozen=True)
class ReturnAsymptote:
    """Large-time return constant ``A_d`` with ``P_00 ~ A_d / (delta0 t)``.

    In d = 1 the defining integral diverges logarithmically; then ``value`` is
    infinite and ``diverges`` is set.
    """

    d: int
    value: float
    diverges: bool
    tail_estimate: float = 0.0
    x_max: float = 0.0


def _j0_power_tail(d, x):
    """``integral_x^inf J0(u)^(2d) du`` from the leading Hankel asymptotics (d >= 2)."""
    chi = x - math.pi / 4
    pref = (2.0 / math.pi) ** d
    mean = math.comb(2 * d, d) / 4 ** d * x ** (1 - d) / (d - 1)
    osc = 0.0
    for k in range(1, d + 1):
        # cos^(2d) = 4^-d [C(2d,d) + 2 sum_k C(2d,d-k) cos(2k chi)]
        ck = 2 * math.comb(2 * d, d - k) / 4 ** d
        osc += ck * (-math.sin(2 * k * chi)) / (2 * k * x ** d)
    return pref * (mean + osc)


def _panel_integral(func, a, b, panel=math.pi, order=32):
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.arange(a, b + 0.5 * panel, panel)
    if edges[-1] < b:
        edges = np.append(edges, b)
    edges[-1] = b
    lo, hi = edges[:-1], edges[1:]
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    pts = mid[:, None] + half[:, None] * xg[None, :]
    return float(np.sum(half[:, None] * wg[None, :] * func(pts)))


def spinbath_return_asymptote(d, tol=1e-10, x_start=256.0, x_cap=2.0 ** 20) -> ReturnAsymptote:
    """``A_d = (1 / 2 pi) integral_{-inf}^{inf} J0(x)^(2d) dx``.

    The integral is taken panel-wise up to ``x_max`` plus an asymptotic tail;
    ``x_max`` doubles until successive estimates agree to ``tol``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if d == 1:
        return ReturnAsymptote(1, math.inf, True)

    def f(x):
        return special.j0(x) ** (2 * d)

    x_max = x_start
    body = _panel_integral(f, 0.0, x_max)
    prev = None
    while True:
        tail = _j0_power_tail(d, x_max)
        est = (body + tail) / math.pi
        if prev is not None and abs(est - prev) < tol:
            return ReturnAsymptote(d, est, False, tail / math.pi, x_max)
        if x_max >= x_cap:
            raise QuadratureError(f"A_{d} did not converge up to x={x_cap:g}")
        prev = est
        body += _panel_integral(f, x_max, 2 * x_max)
        x_max *= 2


@dataclass
class ReturnCurve:
    """Return probability versus ``z`` with the scaled combination expected to level off.

    ``scaled`` is ``z * P00`` for d >= 2 and ``z * P00 / ln z`` for d = 1.
    """

    d: int
    z: np.ndarray
    p00: np.ndarray
    scaled: np.ndarray

    def flatness(self):
        """Largest relative deviation of ``scaled`` from its mean."""
        mean = float(np.mean(self.scaled))
        return float(np.max(np.abs(self.scaled - mean)) / mean)


def spinbath_return_curve(d, z_grid, spec: Optional[SpinBathSpec] = None) -> ReturnCurve:
    spec = spec or SpinBathSpec(d)
    z = np.asarray(z_grid, dtype=float)
    if np.any(np.diff(z) <= 0):
        raise ValueError("z_grid must be increasing")
    origin = np.zeros((1, d), dtype=int)
    p00 = np.array([spinbath_distribution(origin, zz, spec)[0] for zz in z])
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = z * p00 / np.log(z) if d == 1 else z * p00
    return ReturnCurve(d, z, p00, scaled)


@dataclass(frozen=True)
class SpinBathModel:
    """Spin-bath occupations on a finite set of lattice vectors."""

    vectors: np.ndarray
    spec: SpinBathSpec

    def distribution(self, t):
        return spinbath_distribution(self.vectors, 2.0 * self.spec.delta0 * t, self.spec)
