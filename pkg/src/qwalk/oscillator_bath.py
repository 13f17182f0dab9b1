"""Static oscillator-bath quantities: spectral densities and induced couplings.

Lowering the UV cutoff from ``bare`` to ``reduced`` generates a
``V^zz tau^z_n tau^z_m`` coupling between qubits n and m of strength

    V = (1 / pi) * integral_{reduced}^{bare} J(w) / w dw.

Mode weights follow the zero-temperature on-shell convention: mode q
contributes ``(pi / 2) |c_n(q) c_m(q)| / w_q`` to J at ``w = w_q`` (oscillator
masses absorbed into the couplings; any spatial phase is carried by the
per-qubit couplings themselves).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class OscillatorMode:
    frequency: float
    couplings: tuple  # one real coupling per qubit

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("mode frequency must be positive")

    def weight(self, pair):
        n, m = pair
        return 0.5 * math.pi * abs(self.couplings[n] * self.couplings[m]) / self.frequency


@dataclass(frozen=True)
class CutoffPair:
    reduced: float
    bare: float

    def __post_init__(self):
        if not 0 < self.reduced < self.bare:
            raise ValueError("cutoffs must satisfy 0 < reduced < bare")


class SpectralDensity:
    """Base class; subclasses provide ``__call__`` and ``support``."""

    pair = (0, 1)

    @property
    def support(self):
        raise NotImplementedError

    def __call__(self, omega):
        raise NotImplementedError

    def coupling_integral(self, lo, hi):
        """``integral_lo^hi J(w) / w dw`` (without the 1/pi)."""
        val, _ = integrate.quad(lambda w: self(w) / w, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        return val


@dataclass(frozen=True)
class OhmicSpectralDensity(SpectralDensity):
    """``eta * w * exp(-w / cutoff)``; ``soft=False`` drops the exponential."""

    eta: float
    cutoff: float
    soft: bool = True
    pair: tuple = (0, 1)

    def __post_init__(self):
        if self.eta < 0 or not self.cutoff > 0:
            raise ValueError("need eta >= 0 and cutoff > 0")

    @property
    def support(self):
        return 0.0, self.cutoff

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = self.eta * omega
        return out * np.exp(-omega / self.cutoff) if self.soft else out

    def coupling_integral(self, lo, hi):
        if not self.soft:
            return self.eta * (hi - lo)
        return super().coupling_integral(lo, hi)


@dataclass(frozen=True)
class PowerLawSpectralDensity(SpectralDensity):
    """``eta * w^s * cutoff^(1-s) * exp(-w / cutoff)``."""

    eta: float
    s: float
    cutoff: float
    pair: tuple = (0, 1)

    def __post_init__(self):
        if self.eta < 0 or not self.cutoff > 0 or not self.s > 0:
            raise ValueError("need eta >= 0, s > 0 and cutoff > 0")

    @property
    def support(self):
        return 0.0, self.cutoff

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.eta * omega ** self.s * self.cutoff ** (1 - self.s) * np.exp(-omega / self.cutoff)


@dataclass(frozen=True)
class TabulatedSpectralDensity(SpectralDensity):
    """Piecewise-linear J through ``(omega_i, J_i)``; integrated exactly."""

    omega: tuple
    values: tuple
    pair: tuple = (0, 1)

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        j = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.shape != j.shape or w.size < 2:
            raise ValueError("need matching 1-D omega/value arrays with at least 2 points")
        if np.any(np.diff(w) <= 0) or w[0] <= 0:
            raise ValueError("omega grid must be positive and strictly increasing")
        if np.any(j < 0):
            raise ValueError("spectral density must be non-negative")
        object.__setattr__(self, "omega", tuple(map(float, w)))
        object.__setattr__(self, "values", tuple(map(float, j)))

    @property
    def support(self):
        return self.omega[0], self.omega[-1]

    def __call__(self, omega):
        return np.interp(omega, self.omega, self.values)

    def coupling_integral(self, lo, hi):
        w = np.asarray(self.omega)
        inner = w[(w > lo) & (w < hi)]
        knots = np.concatenate([[lo], inner, [hi]])
        j = self(knots)
        a, b = knots[:-1], knots[1:]
        slope = (j[1:] - j[:-1]) / (b - a)
        icpt = j[:-1] - slope * a
        # J = icpt + slope * w  =>  integral J / w = icpt ln(b/a) + slope (b - a)
        return float(np.sum(icpt * np.log(b / a) + slope * (b - a)))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "J"])
            for om, jv in zip(self.omega, self.values):
                w.writerow([repr(float(om)), repr(float(jv))])

    @classmethod
    def from_csv(cls, path, pair=(0, 1)):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(tuple(data[:, 0]), tuple(data[:, 1]), pair)


@dataclass(frozen=True)
class HistogramSpectralDensity(SpectralDensity):
    """Piecewise-constant J on bins; ``values[k] * width_k`` is the bin's mode weight."""

    edges: tuple
    values: tuple
    pair: tuple = (0, 1)

    @property
    def support(self):
        return self.edges[0], self.edges[-1]

    @property
    def centers(self):
        e = np.asarray(self.edges)
        return 0.5 * (e[1:] + e[:-1])

    @property
    def bin_weights(self):
        return np.asarray(self.values) * np.diff(self.edges)

    def __call__(self, omega):
        e = np.asarray(self.edges)
        omega = np.asarray(omega, dtype=float)
        k = np.clip(np.searchsorted(e, omega, side="right") - 1, 0, len(self.values) - 1)
        out = np.asarray(self.values)[k]
        return np.where((omega < e[0]) | (omega > e[-1]), 0.0, out)

    def coupling_integral(self, lo, hi):
        e = np.asarray(self.edges)
        a = np.clip(e[:-1], lo, hi)
        b = np.clip(e[1:], lo, hi)
        keep = b > a
        return float(np.sum(np.asarray(self.values)[keep] * np.log(b[keep] / a[keep])))

    def to_tabulated(self):
        return TabulatedSpectralDensity(tuple(self.centers), tuple(self.values), self.pair)


def spectral_from_modes(modes: Sequence[OscillatorMode], pair, bin_width, omega_max=None):
    """Bin the discrete mode sum into a histogram spectral density.

    Bins are ``[k * bin_width, (k + 1) * bin_width)`` from zero up to the largest
    mode frequency (or ``omega_max``). Total weight is preserved exactly.
    """
    if not modes:
        raise ValueError("at least one mode is required")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    freqs = np.array([m.frequency for m in modes])
    weights = np.array([m.weight(pair) for m in modes])
    top = max(float(freqs.max()), omega_max or 0.0)
    nbins = int(math.floor(top / bin_width)) + 1
    edges = bin_width * np.arange(nbins + 1)
    idx = np.minimum((freqs / bin_width).astype(int), nbins - 1)
    totals = np.bincount(idx, weights=weights, minlength=nbins)
    return HistogramSpectralDensity(tuple(edges), tuple(totals / bin_width), tuple(pair))


def ohmic_modes(eta, omega_max, num_modes, pair=(0, 1)):
    """Equally spaced modes whose weights discretise ``J = eta * w`` on (0, omega_max]."""
    dw = omega_max / num_modes
    freqs = dw * (np.arange(num_modes) + 0.5)
    # (pi/2) c^2 / w = eta * w * dw
    c = np.sqrt(2.0 * eta * freqs ** 2 * dw / math.pi)
    nq = max(pair) + 1
    return [OscillatorMode(float(f), tuple([float(ci)] * nq)) for f, ci in zip(freqs, c)]


def induced_coupling(J: SpectralDensity, cutoffs: CutoffPair) -> float:
    """Induced qubit-qubit coupling generated between the two cutoffs."""
    lo, hi = J.support
    tol = 1e-12 * max(1.0, hi)
    if cutoffs.reduced < lo - tol or cutoffs.bare > hi + tol:
        raise ValueError(
            f"cutoffs [{cutoffs.reduced:g}, {cutoffs.bare:g}] outside spectral support [{lo:g}, {hi:g}]"
        )
    return J.coupling_integral(cutoffs.reduced, cutoffs.bare) / math.pi


@dataclass
class CutoffReport:
    """Consistency of the induced coupling under successive cutoff reductions."""

    v_total: float
    v_lower: float
    v_upper: float
    additivity_residual: float
    cutoffs: np.ndarray
    dv_numeric: np.ndarray
    dv_expected: np.ndarray
    relative_to_delta0: float

    @property
    def max_derivative_error(self):
        return float(np.max(np.abs(self.dv_numeric - self.dv_expected)))


def cutoff_consistency_report(J: SpectralDensity, low, mid, bare, delta0=1.0, samples=5) -> CutoffReport:
    """Check ``V(low, bare) = V(low, mid) + V(mid, bare)`` and ``dV/dcut = -J/(pi cut)``."""
    if not 0 < low < mid < bare:
        raise ValueError("need 0 < low < mid < bare")
    v_total = induced_coupling(J, CutoffPair(low, bare))
    v_lower = induced_coupling(J, CutoffPair(low, mid))
    v_upper = induced_coupling(J, CutoffPair(mid, bare))
    cuts = np.linspace(low, mid, samples + 2)[1:-1]
    h = 1e-4 * (mid - low)
    dv = np.array([
        (induced_coupling(J, CutoffPair(c + h, bare)) - induced_coupling(J, CutoffPair(c - h, bare))) / (2 * h)
        for c in cuts
    ])
    expected = -np.asarray(J(cuts), dtype=float) / (math.pi * cuts)
    return CutoffReport(
        v_total, v_lower, v_upper, abs(v_total - v_lower - v_upper),
        cuts, dv, expected, abs(v_total) / abs(delta0),
    )
