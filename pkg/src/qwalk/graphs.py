"""Walk graphs: hypercubes, truncated hyperlattices and custom graphs.

A graph carries hop amplitudes on undirected edges and on-site energies; the
walk Hamiltonian is ``H[i, j] = -hop`` on every edge and ``H[j, j] = onsite``.
Hypercube nodes are labelled by bitstrings (binary representation of the node
index, one character per qubit); hyperlattice nodes by integer vectors in
``[-L, L]^d`` with the origin at the centre.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import ResourceBudgetError

DEFAULT_NODE_BUDGET = 2 ** 12
NODE_BUDGET_ENV = "QWALK_NODE_BUDGET"


def node_budget() -> int:
    """Current node budget (``QWALK_NODE_BUDGET`` overrides the 4096 default)."""
    raw = os.environ.get(NODE_BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_NODE_BUDGET
    value = int(raw)
    if value < 1:
        raise ValueError(f"{NODE_BUDGET_ENV} must be a positive integer")
    return value


def _check_budget(num_nodes, budget):
    budget = node_budget() if budget is None else budget
    if num_nodes > budget:
        raise ResourceBudgetError(
            f"model needs {num_nodes} nodes, node budget is {budget} "
            f"(set {NODE_BUDGET_ENV} to raise it)"
        )


@dataclass(frozen=True)
class BitString:
    """Qubit register state; ``0`` is spin down, ``1`` is spin up.

    Character ``k`` of ``str(b)`` is qubit ``k``; the node index is the usual
    binary value of that string, so qubit 0 is the most significant bit.
    """

    bits: tuple

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        if not 0 <= value < 2 ** length:
            raise ValueError(f"{value} does not fit in {length} bits")
        return cls(tuple(int(c) for c in format(value, f"0{length}b")) if length else ())

    @classmethod
    def parse(cls, text: str) -> "BitString":
        mapping = {"0": 0, "1": 1, "↓": 0, "↑": 1}
        try:
            return cls(tuple(mapping[c] for c in text))
        except KeyError as exc:
            raise ValueError(f"invalid bitstring {text!r}") from exc

    @classmethod
    def coerce(cls, value, length: Optional[int] = None) -> "BitString":
        if isinstance(value, BitString):
            out = value
        elif isinstance(value, str):
            out = cls.parse(value)
        elif isinstance(value, (int, np.integer)):
            if length is None:
                raise ValueError("an integer node needs an explicit length")
            out = cls.from_int(int(value), length)
        else:
            out = cls(tuple(int(b) for b in value))
        if length is not None and len(out) != length:
            raise ValueError(f"expected {length} bits, got {len(out)}")
        return out

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(str(b) for b in self.bits)

    def to_int(self) -> int:
        return int(str(self), 2) if self.bits else 0

    @property
    def n_up(self) -> int:
        return sum(self.bits)

    @property
    def n_down(self) -> int:
        return len(self.bits) - self.n_up


def hamming_distance(m, n) -> int:
    """Number of differing bits between two equal-length bitstrings."""
    a = BitString.coerce(m)
    b = BitString.coerce(n)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return sum(x != y for x, y in zip(a.bits, b.bits))


@dataclass(frozen=True)
class HypercubeSpec:
    D: int
    delta0: float = 1.0

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 1:
            raise ValueError("hypercube dimension D must be an integer >= 1")


@dataclass(frozen=True)
class HyperlatticeSpec:
    d: int
    delta0: float = 1.0
    L: int = 10

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("lattice dimension d must be an integer >= 1")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("truncation half-width L must be an integer >= 1")


@dataclass(frozen=True)
class Graph:
    """Immutable weighted undirected graph.

    Attributes:
        num_nodes: number of nodes.
        edges: tuple of ``(i, j, hop)`` with ``i < j``.
        onsite: per-node on-site energy.
        labels: optional per-node labels (``BitString`` or lattice tuple).
        kind: ``"hypercube"``, ``"hyperlattice"`` or ``"custom"``.
    """

    num_nodes: int
    edges: tuple
    onsite: tuple
    labels: Optional[tuple] = None
    kind: str = "custom"
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.num_nodes
        if n < 1:
            raise ValueError("num_nodes must be positive")
        seen = set()
        clean = []
        for i, j, hop in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) outside [0, {n})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((key[0], key[1], float(hop)))
        object.__setattr__(self, "edges", tuple(clean))
        if len(self.onsite) != n:
            raise ValueError("onsite must have one entry per node")
        object.__setattr__(self, "onsite", tuple(float(e) for e in self.onsite))
        if self.labels is not None:
            if len(self.labels) != n:
                raise ValueError("labels must have one entry per node")
            object.__setattr__(self, "labels", tuple(self.labels))

    # queries

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=int)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric sparse matrix of hop amplitudes."""
        if not self.edges:
            return sparse.csr_matrix((self.num_nodes, self.num_nodes))
        i, j, w = (np.array(c) for c in zip(*self.edges))
        a = sparse.coo_matrix((w, (i, j)), shape=(self.num_nodes, self.num_nodes))
        return (a + a.T).tocsr()

    def index_of(self, label) -> int:
        """Node index carrying ``label``."""
        if self.labels is None:
            raise ValueError("graph has no labels")
        if self._index is None:
            object.__setattr__(self, "_index", {self._key(l): k for k, l in enumerate(self.labels)})
        key = self._key(BitString.coerce(label) if self.kind == "hypercube" else label)
        try:
            return self._index[key]
        except KeyError:
            raise ValueError(f"no node labelled {label!r}") from None

    @staticmethod
    def _key(label):
        if isinstance(label, BitString):
            return ("b",) + label.bits
        return tuple(int(v) for v in label)

    @property
    def origin(self) -> int:
        """Starting node: the all-down corner or the lattice centre."""
        if self.kind == "hyperlattice":
            return self.index_of((0,) * len(self.labels[0]))
        return 0

    @property
    def far_corner(self) -> int:
        if self.kind != "hypercube":
            raise ValueError("far corner is only defined for hypercubes")
        return self.num_nodes - 1

    def lattice_vectors(self) -> np.ndarray:
        """Labels as an integer array of shape ``(num_nodes, d)``."""
        if self.labels is None:
            raise ValueError("graph has no labels")
        if isinstance(self.labels[0], BitString):
            return np.array([l.bits for l in self.labels], dtype=int)
        return np.array(self.labels, dtype=int)

    # serialization

    def to_dict(self) -> dict:
        labels = None
        if self.labels is not None:
            labels = [str(l) if isinstance(l, BitString) else list(l) for l in self.labels]
        return {
            "num_nodes": self.num_nodes,
            "edges": [[i, j, hop] for i, j, hop in self.edges],
            "onsite": list(self.onsite),
            "labels": labels,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Graph":
        labels = doc.get("labels")
        if labels is not None:
            labels = [BitString.parse(l) if isinstance(l, str) else tuple(l) for l in labels]
        return cls(
            num_nodes=int(doc["num_nodes"]),
            edges=tuple(tuple(e) for e in doc["edges"]),
            onsite=tuple(doc.get("onsite") or [0.0] * int(doc["num_nodes"])),
            labels=labels,
            kind=doc.get("kind", "custom"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def build_hypercube(spec: HypercubeSpec, budget: Optional[int] = None) -> Graph:
    """D-dimensional hypercube: nodes adjacent iff their bitstrings differ in one bit."""
    n = 2 ** spec.D
    _check_budget(n, budget)
    edges = []
    for node in range(n):
        for k in range(spec.D):
            other = node ^ (1 << k)
            if other > node:
                edges.append((node, other, spec.delta0))
    labels = tuple(BitString.from_int(v, spec.D) for v in range(n))
    return Graph(n, tuple(edges), (0.0,) * n, labels, kind="hypercube")


def build_hyperlattice(spec: HyperlatticeSpec, budget: Optional[int] = None) -> Graph:
    """Open-boundary cubic lattice ``[-L, L]^d`` with nearest-neighbour hops."""
    side = 2 * spec.L + 1
    n = side ** spec.d
    _check_budget(n, budget)
    coords = list(itertools.product(range(-spec.L, spec.L + 1), repeat=spec.d))
    # row-major index: the last axis varies fastest
    strides = [side ** (spec.d - 1 - mu) for mu in range(spec.d)]
    edges = []
    for idx, vec in enumerate(coords):
        for mu in range(spec.d):
            if vec[mu] < spec.L:
                edges.append((idx, idx + strides[mu], spec.delta0))
    return Graph(n, tuple(edges), (0.0,) * n, tuple(coords), kind="hyperlattice")


def hamiltonian_matrix(g: Graph) -> np.ndarray:
    """Dense walk Hamiltonian (real symmetric)."""
    h = np.diag(np.asarray(g.onsite, dtype=float))
    for i, j, hop in g.edges:
        h[i, j] = -hop
        h[j, i] = -hop
    return h


def hamiltonian_sparse(g: Graph) -> sparse.csr_matrix:
    """Sparse CSR version of :func:`hamiltonian_matrix`."""
    return (-g.adjacency() + sparse.diags(np.asarray(g.onsite, dtype=float))).tocsr()


def band_energy(p: Sequence[float], delta0: float) -> float:
    """Free-walker dispersion ``2 * delta0 * sum(cos p_mu)`` (lattice spacing 1)."""
    return float(2.0 * delta0 * np.sum(np.cos(np.asarray(p, dtype=float))))
