"""Analytic propagators for the free walks and single-qubit dephasing.

Time conventions: on the hypercube each qubit flips with angle ``delta0 * t``
(exact exponentiation of ``H = -delta0 * sum tau^x``); on the hyperlattice the
dimensionless time is ``z = 2 * delta0 * t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_j_orders
from .graphs import BitString

UNDERDAMPED = "underdamped"
CRITICAL = "critical"
OVERDAMPED = "overdamped"


def flip_angle(delta0, t):
    """Single-qubit flip angle reached after time ``t``."""
    return delta0 * np.asarray(t, dtype=float)


def free_hypercube_prob(D, delta0, t, target):
    """Probability of finding the free walker at ``target`` after time ``t``.

    The walker starts on the all-down corner. Works elementwise on array ``t``.
    """
    b = BitString.coerce(target, D)
    theta = flip_angle(delta0, t)
    return np.cos(theta) ** (2 * b.n_down) * np.sin(theta) ** (2 * b.n_up)


def free_hypercube_distribution(D, delta0, t):
    """Occupation of all ``2**D`` nodes at a single time ``t``."""
    theta = float(flip_angle(delta0, t))
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    ups = np.array([bin(v).count("1") for v in range(2 ** D)])
    return c2 ** (D - ups) * s2 ** ups


@dataclass(frozen=True)
class FreeHypercubeModel:
    D: int
    delta0: float = 1.0

    def distribution(self, t):
        return free_hypercube_distribution(self.D, self.delta0, t)


@dataclass(frozen=True)
class BlochVector:
    """Pauli expectation values of one qubit (scalars or equal-shape arrays)."""

    x: float
    y: float
    z: float

    @property
    def norm(self):
        return np.sqrt(np.asarray(self.x) ** 2 + np.asarray(self.y) ** 2 + np.asarray(self.z) ** 2)

    def as_array(self):
        return np.array([self.x, self.y, self.z], dtype=float)

    def density_matrix(self):
        """2x2 density matrix for a scalar Bloch vector."""
        x, y, z = (float(v) for v in (self.x, self.y, self.z))
        return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


@dataclass(frozen=True)
class DephasingParams:
    """Hop amplitude and dephasing rate of a single qubit.

    ``r = gamma / (4 delta0)``; ``r < 1`` is underdamped, ``r > 1`` overdamped.
    """

    delta0: float
    gamma: float
    critical_rtol: float = 1e-12

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.delta0 == 0:
            raise ValueError("delta0 must be non-zero")

    @property
    def r(self):
        return self.gamma / (4.0 * abs(self.delta0))

    @property
    def regime(self):
        if abs(self.r - 1.0) <= self.critical_rtol:
            return CRITICAL
        return UNDERDAMPED if self.r < 1.0 else OVERDAMPED

    @property
    def omega(self):
        """Oscillation frequency ``2 delta0 sqrt(1 - r^2)`` (underdamped only)."""
        if self.r >= 1.0:
            raise ValueError("omega is only defined in the underdamped regime")
        return 2.0 * abs(self.delta0) * math.sqrt(1.0 - self.r ** 2)

    @property
    def rates(self):
        """``(lambda_plus, lambda_minus)`` decay rates (overdamped only)."""
        disc = self.gamma ** 2 - 16.0 * self.delta0 ** 2
        if disc < 0:
            raise ValueError("decay rates are only defined in the overdamped regime")
        root = math.sqrt(disc)
        return 0.5 * (self.gamma + root), 0.5 * (self.gamma - root)


def bloch_dephasing(initial: BlochVector, params: DephasingParams, t) -> BlochVector:
    """Bloch vector of a dephased qubit under ``H = -delta0 sigma^x``.

    Solves ``x' = -gamma x``, ``y' = 2 delta0 z - gamma y``,
    ``z' = -2 delta0 y`` in closed form in all three damping regimes.
    """
    t = np.asarray(t, dtype=float)
    d0, g = params.delta0, params.gamma
    x0, y0, z0 = float(initial.x), float(initial.y), float(initial.z)
    x = x0 * np.exp(-g * t)
    r = params.r
    regime = params.regime
    # the y,z block only sees |delta0| through r; the sign enters via the coupling
    sgn = math.copysign(1.0, d0)
    yy, zz = sgn * y0, z0
    if regime == UNDERDAMPED:
        w = params.omega
        root = math.sqrt(1.0 - r * r)
        env = np.exp(-g * t / 2.0)
        s, c = np.sin(w * t), np.cos(w * t)
        y = env * ((zz - r * yy) / root * s + yy * c)
        z = env * (zz * c + (r * zz - yy) / root * s)
    elif regime == CRITICAL:
        # double root at gamma / 2 = 2 |delta0|
        a = 2.0 * abs(d0)
        env = np.exp(-a * t)
        slope = a * (zz - yy)
        y = env * (yy + slope * t)
        z = env * (zz + slope * t)
    else:
        lp, lm = params.rates
        q = math.sqrt(r * r - 1.0)
        ep, em = np.exp(-lp * t), np.exp(-lm * t)
        a_p = (r - q) * zz - yy
        a_m = -((r + q) * zz - yy)
        b_p = zz - (r + q) * yy
        b_m = -(zz - (r - q) * yy)
        z = -(a_p * ep + a_m * em) / (2.0 * q)
        y = -(b_p * ep + b_m * em) / (2.0 * q)
    return BlochVector(x, sgn * y, z)


def hypercube_probs_from_bloch(z_t, D, tol=1e-9):
    """``(P_origin, P_far)`` for D identical product-state qubits with Bloch z."""
    z_t = np.asarray(z_t, dtype=float)
    if np.any(np.abs(z_t) > 1.0 + tol):
        raise ValueError("|z| exceeds 1: not a physical Bloch vector")
    return ((1.0 + z_t) / 2.0) ** D, ((1.0 - z_t) / 2.0) ** D


def free_hyperlattice_prob(n, z):
    """``prod_mu J_{n_mu}(z)^2``: occupation of site ``n`` at dimensionless time ``z``."""
    n = np.abs(np.atleast_1d(np.asarray(n, dtype=int)))
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    table = bessel_j_orders(int(n.max()), z)
    return np.prod(table[n] ** 2, axis=0)


def free_hyperlattice_distribution(vectors, z):
    """Closed-form occupations for an array of lattice vectors, shape ``(N, d)``."""
    vectors = np.abs(np.asarray(vectors, dtype=int))
    table = bessel_j_orders(int(vectors.max()), float(z)) ** 2
    return np.prod(table[vectors], axis=1)


def free_msd(d, delta0, t):
    """Mean-square displacement ``d z^2 / 2`` of the free lattice walk."""
    z = 2.0 * delta0 * np.asarray(t, dtype=float)
    return d * z ** 2 / 2.0


@dataclass(frozen=True)
class FreeHyperlatticeModel:
    """Infinite-lattice free walk evaluated on a finite set of lattice vectors."""

    vectors: np.ndarray
    delta0: float = 1.0

    def distribution(self, t):
        return free_hyperlattice_distribution(self.vectors, 2.0 * self.delta0 * t)
