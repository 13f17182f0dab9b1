"""Density-matrix evolution under the Lindblad master equation.

    d rho / dt = -i [H, rho] + c * gamma * sum_k D[M_k] rho
    D[M] rho   = M rho M^+ - (M^+ M rho + rho M^+ M) / 2

with ``c = 1`` for site projectors and custom jumps and ``c = 1/2`` for
single-qubit sigma^z dephasing. Site and qubit families are both pure
dephasing in the node basis, so their dissipator is an elementwise decay
mask on rho (O(N^2) per step); custom jumps go through the dense sum.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import ResourceBudgetError
from .graphs import Graph
from .integrators import dopri45, rk4_fixed

logger = logging.getLogger(__name__)

SITE = "site"
QUBIT = "qubit"
CUSTOM = "custom"

# dense density matrices: general jump sums are O(N^3) per stage
DENSE_JUMP_LIMIT = 64
DENSITY_MATRIX_LIMIT = 1024
STATE_STORE_LIMIT = 64

_SZ = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class JumpOperatorSet:
    """Lindblad operators sharing one global rate ``gamma``.

    ``decay_mask`` is set for the dephasing families: then the full
    dissipator equals ``-gamma * decay_mask * rho`` elementwise.
    """

    kind: str
    operators: tuple
    gamma: float
    decay_mask: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (SITE, QUBIT, CUSTOM):
            raise ValueError(f"unknown jump kind {self.kind!r}")
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")

    @property
    def prefactor(self):
        return self.gamma / 2.0 if self.kind == QUBIT else self.gamma

    @property
    def dim(self):
        if self.decay_mask is not None:
            return self.decay_mask.shape[0]
        return self.operators[0].shape[0] if self.operators else None

    def with_gamma(self, gamma) -> "JumpOperatorSet":
        return JumpOperatorSet(self.kind, self.operators, gamma, self.decay_mask)


def build_site_projectors(g, gamma=0.0) -> JumpOperatorSet:
    """One projector ``|j><j|`` per node. ``g`` is a Graph or a node count."""
    n = g.num_nodes if isinstance(g, Graph) else int(g)
    ops = []
    for j in range(n):
        p = sparse.csr_matrix(([1.0], ([j], [j])), shape=(n, n))
        ops.append(p)
    mask = 1.0 - np.eye(n)
    return JumpOperatorSet(SITE, tuple(ops), gamma, mask)


def qubit_sigma_z(D, k):
    """``sigma^z`` on qubit ``k`` of a D-qubit register (qubit 0 leftmost)."""
    diag = np.ones(2 ** D)
    for idx in range(2 ** D):
        if (idx >> (D - 1 - k)) & 1:
            diag[idx] = -1.0
    return sparse.diags(diag).tocsr()


def build_qubit_dephasing(D, gamma=0.0) -> JumpOperatorSet:
    """``sigma^z_k`` on each of the D qubits; coherence ``rho_mn`` decays at gamma * Hamming(m, n)."""
    if D < 1:
        raise ValueError("D must be >= 1")
    ops = tuple(qubit_sigma_z(D, k) for k in range(D))
    idx = np.arange(2 ** D)
    x = idx[:, None] ^ idx[None, :]
    hamming = np.vectorize(lambda v: bin(v).count("1"))(x).astype(float)
    return JumpOperatorSet(QUBIT, ops, gamma, hamming)


def custom_jumps(operators, gamma) -> JumpOperatorSet:
    ops = tuple(np.asarray(m.toarray() if sparse.issparse(m) else m, dtype=complex) for m in operators)
    if not ops:
        raise ValueError("at least one operator is required")
    shape = ops[0].shape
    if any(m.shape != shape or shape[0] != shape[1] for m in ops):
        raise ValueError("jump operators must be square and of equal shape")
    return JumpOperatorSet(CUSTOM, ops, gamma)


def _dense(m):
    return m.toarray() if sparse.issparse(m) else np.asarray(m)


def dissipator_apply(M, rho):
    """``M rho M^+ - (M^+ M rho + rho M^+ M) / 2``."""
    M = _dense(M)
    rho = np.asarray(rho)
    if M.shape != rho.shape or M.shape[0] != M.shape[1]:
        raise ValueError(f"shape mismatch: M {M.shape}, rho {rho.shape}")
    md = M.conj().T
    mdm = md @ M
    return M @ rho @ md - 0.5 * (mdm @ rho + rho @ mdm)


def master_rhs(rho, H, jumps: JumpOperatorSet):
    """Right-hand side of the master equation, evaluated term by term."""
    rho = np.asarray(rho)
    Hd = _dense(H)
    if Hd.shape != rho.shape:
        raise ValueError(f"dimension mismatch: H {Hd.shape}, rho {rho.shape}")
    out = -1j * (Hd @ rho - rho @ Hd)
    if jumps.gamma != 0:
        diss = np.zeros_like(out)
        for M in jumps.operators:
            if _dense(M).shape != rho.shape:
                raise ValueError("jump operator dimension does not match rho")
            diss += dissipator_apply(M, rho)
        out = out + jumps.prefactor * diss
    return out


# initial states

def localized_state(n, node=0):
    rho = np.zeros((n, n), dtype=complex)
    rho[node, node] = 1.0
    return rho


def uniform_superposition(n):
    return np.full((n, n), 1.0 / n, dtype=complex)


@dataclass
class IntegratorConfig:
    """Time-stepping settings.

    ``method`` is ``"rk45"`` (adaptive Dormand-Prince) or ``"rk4"`` (fixed
    step of at most ``max_step``, 0.01 when unset).
    """

    method: str = "rk45"
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_step: Optional[float] = None
    renormalize_trace: bool = False

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")

    @property
    def fixed_step(self):
        return self.max_step if self.max_step is not None else 0.01


@dataclass
class Trajectory:
    """Sampled evolution: node populations for every time, optional full states."""

    times: np.ndarray
    populations: np.ndarray
    states: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be a strictly increasing 1-D grid")

    @property
    def num_nodes(self):
        return self.populations.shape[1]

    def to_csv(self, path, columns=None):
        """Write ``t`` plus ``columns`` (name -> per-time values) or all populations."""
        import csv

        if columns is None:
            columns = {f"p_{j}": self.populations[:, j] for j in range(self.num_nodes)}
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *columns])
            for k, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(np.real(v[k]))) for v in columns.values()])

    def to_json(self, path, max_nodes=STATE_STORE_LIMIT):
        """Dump times and full density matrices (real/imag lists) for small N."""
        if self.states is None:
            raise ValueError("trajectory holds no density matrices")
        if self.num_nodes > max_nodes:
            raise ResourceBudgetError(f"state dump limited to N <= {max_nodes}")
        doc = {
            "times": self.times.tolist(),
            "states": [{"re": s.real.tolist(), "im": s.imag.tolist()} for s in self.states],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        states = np.array([np.array(s["re"]) + 1j * np.array(s["im"]) for s in doc["states"]])
        pops = np.real(np.einsum("tii->ti", states))
        return cls(np.array(doc["times"]), pops, states)


def _hermitize(rho):
    return 0.5 * (rho + rho.conj().T)


def _make_rhs(H, jumps):
    Hs = sparse.csr_matrix(H) if not sparse.issparse(H) else H.tocsr()
    HsT = Hs.T.tocsr()
    n = Hs.shape[0]
    if jumps is None or jumps.gamma == 0:
        def rhs(t, rho):
            return -1j * (Hs @ rho - (HsT @ rho.T).T)
    elif jumps.decay_mask is not None:
        rate = jumps.gamma * jumps.decay_mask
        if rate.shape != (n, n):
            raise ValueError("jump set dimension does not match the Hamiltonian")

        def rhs(t, rho):
            return -1j * (Hs @ rho - (HsT @ rho.T).T) - rate * rho
    else:
        if n > DENSE_JUMP_LIMIT:
            raise ResourceBudgetError(
                f"general jump operators are limited to N <= {DENSE_JUMP_LIMIT}"
            )
        ops = [_dense(m).astype(complex) for m in jumps.operators]
        if any(m.shape != (n, n) for m in ops):
            raise ValueError("jump set dimension does not match the Hamiltonian")
        mds = [m.conj().T for m in ops]
        sum_mdm = sum(md @ m for md, m in zip(mds, ops))
        c = jumps.prefactor
        Hd = Hs.toarray()

        def rhs(t, rho):
            out = -1j * (Hd @ rho - rho @ Hd)
            jump = sum(m @ rho @ md for m, md in zip(ops, mds))
            return out + c * (jump - 0.5 * (sum_mdm @ rho + rho @ sum_mdm))
    return rhs


def evolve(rho0, H, jumps: Optional[JumpOperatorSet], t_grid, cfg: Optional[IntegratorConfig] = None,
           store_states: Optional[bool] = None, check_positivity: bool = False) -> Trajectory:
    """Integrate the master equation from ``rho0`` at ``t_grid[0]``.

    Args:
        rho0: initial density matrix (N x N).
        H: Hamiltonian, dense or sparse.
        jumps: jump operators, or None for unitary evolution.
        t_grid: strictly increasing output times.
        cfg: integrator settings.
        store_states: keep full density matrices (default: only for N <= 64).
        check_positivity: record the minimum eigenvalue at every output time.

    Returns:
        Trajectory with diagnostics ``max_trace_drift``, ``max_hermiticity_residual``
        and step statistics.

    Raises:
        IntegrationError: on step-size underflow, with the offending time.
    """
    cfg = cfg or IntegratorConfig()
    rho0 = np.array(rho0, dtype=complex)
    n = rho0.shape[0]
    if rho0.shape != (n, n) or H.shape != (n, n):
        raise ValueError("rho0 and H must be square matrices of equal size")
    if n > DENSITY_MATRIX_LIMIT:
        raise ResourceBudgetError(f"density-matrix evolution is limited to N <= {DENSITY_MATRIX_LIMIT}")
    if abs(np.trace(rho0) - 1) > 1e-12 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise ValueError("rho0 must be Hermitian with unit trace")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if store_states is None:
        store_states = n <= STATE_STORE_LIMIT

    rhs = _make_rhs(H, jumps)
    pops = np.empty((t_grid.size, n))
    states = np.empty((t_grid.size, n, n), dtype=complex) if store_states else None
    diag = {"max_trace_drift": 0.0, "max_hermiticity_residual": 0.0}
    if check_positivity:
        diag["min_eigenvalue"] = math.inf

    def post_step(rho):
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        diag["max_hermiticity_residual"] = max(diag["max_hermiticity_residual"], herm)
        rho = _hermitize(rho)
        if cfg.renormalize_trace:
            rho = rho / np.trace(rho).real
        return rho

    def on_output(k, rho):
        pops[k] = np.real(np.diagonal(rho))
        diag["max_trace_drift"] = max(diag["max_trace_drift"], abs(np.trace(rho).real - 1.0))
        if states is not None:
            states[k] = rho
        if check_positivity:
            diag["min_eigenvalue"] = min(diag["min_eigenvalue"], float(np.linalg.eigvalsh(rho)[0]))

    if t_grid.size == 1:
        on_output(0, rho0)
        stats = None
    elif cfg.method == "rk4":
        stats = rk4_fixed(rhs, rho0, t_grid, cfg.fixed_step, post_step, on_output)
    else:
        max_step = cfg.max_step if cfg.max_step is not None else math.inf
        stats = dopri45(rhs, rho0, t_grid, cfg.abs_tol, cfg.rel_tol, max_step, post_step, on_output)
    if stats is not None:
        diag.update(stats.as_dict())
    diag["method"] = cfg.method
    logger.debug("evolve N=%d diagnostics=%s", n, diag)
    return Trajectory(t_grid, pops, states, diag)


def unitary_evolve(psi0, H, t_grid) -> Trajectory:
    """Exact pure-state evolution ``exp(-i H t) psi0`` via eigendecomposition."""
    Hd = _dense(H)
    w, v = np.linalg.eigh(Hd)
    c0 = v.conj().T @ np.asarray(psi0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    phases = np.exp(-1j * np.outer(t_grid - t_grid[0], w))
    amps = (phases * c0[None, :]) @ v.T
    pops = np.abs(amps) ** 2
    return Trajectory(t_grid, pops, None, {"method": "eigh", "max_norm_drift": float(np.max(np.abs(pops.sum(1) - 1)))})


@dataclass
class DecayRates:
    """Fitted coherence decay rates.

    Attributes:
        rates: ``{(m, n): rate}`` for every ``m < n``.
        by_hamming: ``{C: [rates]}`` grouped by Hamming distance of the indices.
        residual: largest RMS residual of the log-linear fits.
    """

    rates: dict
    by_hamming: dict
    residual: float

    def cluster_means(self):
        return {c: float(np.mean(v)) for c, v in sorted(self.by_hamming.items())}


def offdiag_decay_rates(traj: Trajectory, floor=1e-12) -> DecayRates:
    """Fit ``|rho_mn(t)| ~ exp(-rate t)`` for each coherence of a trajectory.

    The trajectory must come from a zero Hamiltonian run with stored states.

    Raises:
        FitError: if a coherence is below ``floor`` (cannot be fitted).
    """
    from .errors import FitError

    if traj.states is None:
        raise ValueError("trajectory must hold density matrices")
    n = traj.num_nodes
    t = traj.times
    if t.size < 2:
        raise FitError("need at least two time points")
    rates, groups, worst = {}, {}, 0.0
    for m in range(n):
        for k in range(m + 1, n):
            mag = np.abs(traj.states[:, m, k])
            if np.any(mag < floor):
                raise FitError(f"coherence ({m}, {k}) drops below {floor:g}")
            coef, res, *_ = np.polyfit(t, np.log(mag), 1, full=True)
            rate = -float(coef[0])
            rms = math.sqrt(float(res[0]) / t.size) if res.size else 0.0
            worst = max(worst, rms)
            rates[(m, k)] = rate
            groups.setdefault(bin(m ^ k).count("1"), []).append(rate)
    return DecayRates(rates, groups, worst)
