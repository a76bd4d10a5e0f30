"""Partitioning models of a sparse adjacency matrix and their cut metrics.

Three models of the same row-wise distribution problem:

* undirected graph model: one vertex per row, one undirected edge per
  symmetrized off-diagonal nonzero, unit edge costs. Its cut OVERCOUNTS
  communication (one-way edges still count both directions; several
  consumers on one remote part count once per consumer).
* column-net hypergraph model: one vertex per row, one net per column,
  pins(n_j) = rows with a nonzero in column j. Sum of (lambda - 1) over
  nets is EXACTLY the number of row transfers per direction.
* stochastic hypergraph: union of the column-net hypergraphs of many
  sampled induced subgraphs; its cut estimates the expected per-batch
  transfer count for mini-batch training.

Vertex weights are row nonzero counts of the normalized matrix, which is
the per-row multiply work, so part weights model compute load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sparse import CsrMatrix


@dataclass(frozen=True)
class UGraph:
    """Undirected graph with per-edge costs and integer vertex weights."""

    n_vertices: int
    edges: np.ndarray  # (m, 2), each row (u, v) with u < v, lexicographically sorted
    edge_cost: np.ndarray
    vertex_weight: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must be stored as (u, v) with u < v (no self loops)")
            if np.any(e < 0) or e.max() >= self.n_vertices:
                raise ValueError("edge endpoint out of range")
            uniq = np.unique(e, axis=0)
            if len(uniq) != len(e):
                raise ValueError("duplicate edges")
        c = np.asarray(self.edge_cost, dtype=np.float64)
        w = np.asarray(self.vertex_weight, dtype=np.int64)
        if len(c) != len(e) or len(w) != self.n_vertices:
            raise ValueError("cost/weight arrays have wrong length")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "edge_cost", c)
        object.__setattr__(self, "vertex_weight", w)
        for arr in (e, c, w):
            arr.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Hypergraph:
    """Hypergraph with sorted pin lists, per-net costs, integer vertex weights."""

    n_vertices: int
    nets: tuple
    net_cost: np.ndarray
    vertex_weight: np.ndarray

    def __post_init__(self):
        pins = []
        for j, net in enumerate(self.nets):
            p = np.asarray(net, dtype=np.int64)
            if len(p) == 0:
                raise ValueError(f"net {j} has no pins")
            if np.any(np.diff(p) <= 0):
                raise ValueError(f"net {j} pins must be sorted and distinct")
            if p[0] < 0 or p[-1] >= self.n_vertices:
                raise ValueError(f"net {j} pin out of range")
            p.setflags(write=False)
            pins.append(p)
        c = np.asarray(self.net_cost, dtype=np.float64)
        w = np.asarray(self.vertex_weight, dtype=np.int64)
        if len(c) != len(pins) or len(w) != self.n_vertices:
            raise ValueError("cost/weight arrays have wrong length")
        object.__setattr__(self, "nets", tuple(pins))
        object.__setattr__(self, "net_cost", c)
        object.__setattr__(self, "vertex_weight", w)
        c.setflags(write=False)
        w.setflags(write=False)

    @property
    def n_nets(self) -> int:
        return len(self.nets)


@dataclass(frozen=True)
class Partition:
    """p-way vertex assignment with per-part weights and imbalance budget."""

    p: int
    assignment: np.ndarray
    part_weights: np.ndarray
    epsilon: float

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        pw = np.asarray(self.part_weights, dtype=np.int64)
        if len(a) and (a.min() < 0 or a.max() >= self.p):
            raise ValueError("part id out of range")
        if len(pw) != self.p:
            raise ValueError("part_weights must have length p")
        if len(np.unique(a)) != self.p:
            raise ValueError("every part must be non-empty")
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "part_weights", pw)
        a.setflags(write=False)
        pw.setflags(write=False)

    @classmethod
    def from_assignment(cls, assignment, weights, p: int, epsilon: float) -> "Partition":
        assignment = np.asarray(assignment, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.int64)
        pw = np.zeros(p, dtype=np.int64)
        np.add.at(pw, assignment, weights)
        return cls(p, assignment, pw, float(epsilon))

    @property
    def n_vertices(self) -> int:
        return len(self.assignment)

    def balance_ratio(self) -> float:
        avg = self.part_weights.sum() / self.p
        return float(self.part_weights.max() / avg - 1.0)

    def is_balanced(self) -> bool:
        cap = (1.0 + self.epsilon) * self.part_weights.sum() / self.p
        return bool(np.all(self.part_weights <= cap))


@dataclass(frozen=True)
class CutReport:
    cut_value: float
    per_net_lambda: "np.ndarray | None"
    balance_ratio: float


def _check_assignment(n_vertices: int, pi: Partition) -> None:
    if pi.n_vertices != n_vertices:
        raise ValueError(
            f"partition covers {pi.n_vertices} vertices, model has {n_vertices}"
        )


def build_graph_model(a: CsrMatrix) -> UGraph:
    """Undirected edges = symmetrized off-diagonal pattern; w(v_i) = row nnz."""
    if a.n_rows != a.n_cols:
        raise ValueError("matrix must be square")
    rows = np.repeat(np.arange(a.n_rows, dtype=np.int64), a.row_nnz())
    cols = a.col_indices
    off = rows != cols
    u = np.minimum(rows[off], cols[off])
    v = np.maximum(rows[off], cols[off])
    if len(u):
        pairs = np.unique(np.stack([u, v], axis=1), axis=0)
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
    return UGraph(a.n_rows, pairs, np.ones(len(pairs)), a.row_nnz())


def build_hypergraph_model(a: CsrMatrix) -> Hypergraph:
    """Column-net model: net n_j pins the rows with a nonzero in column j."""
    if a.n_rows != a.n_cols:
        raise ValueError("matrix must be square")
    if not a.has_full_diagonal():
        raise ValueError("column-net model requires a full diagonal (self loops)")
    rows = np.repeat(np.arange(a.n_rows, dtype=np.int64), a.row_nnz())
    order = np.argsort(a.col_indices, kind="stable")
    sorted_cols = a.col_indices[order]
    sorted_rows = rows[order]
    bounds = np.searchsorted(sorted_cols, np.arange(a.n_cols + 1))
    nets = [np.sort(sorted_rows[bounds[j] : bounds[j + 1]]) for j in range(a.n_cols)]
    return Hypergraph(a.n_rows, tuple(nets), np.ones(a.n_cols), a.row_nnz())


def evaluate_graph_cut(g: UGraph, pi: Partition) -> CutReport:
    """Total cost over edges whose endpoints land in different parts."""
    _check_assignment(g.n_vertices, pi)
    if g.n_edges:
        crossing = pi.assignment[g.edges[:, 0]] != pi.assignment[g.edges[:, 1]]
        cut = float(g.edge_cost[crossing].sum())
    else:
        cut = 0.0
    return CutReport(cut, None, pi.balance_ratio())


def net_connectivity(h: Hypergraph, pi: Partition) -> np.ndarray:
    """lambda(n_j): number of distinct parts touched by each net's pins."""
    _check_assignment(h.n_vertices, pi)
    return np.array(
        [len(np.unique(pi.assignment[pins])) for pins in h.nets], dtype=np.int64
    )


def evaluate_hypergraph_cut(h: Hypergraph, pi: Partition) -> CutReport:
    """Connectivity cut: sum of cost(n_j) * (lambda(n_j) - 1)."""
    lam = net_connectivity(h, pi)
    cut = float((h.net_cost * (lam - 1)).sum())
    return CutReport(cut, lam, pi.balance_ratio())


def predicted_total_volume(h: Hypergraph, pi: Partition, dims) -> int:
    """Scalar words moved in one full epoch (feedforward + backprop).

    Each cut net sends one feature row (d_{k-1} words) and one gradient row
    (d_k words) per layer to each of its lambda-1 remote parts, hence the
    per-net word cost sum_k (d_{k-1} + d_k).
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("dims must list d_0..d_L for at least one layer")
    words_per_cut = sum(dims[k - 1] + dims[k] for k in range(1, len(dims)))
    lam = net_connectivity(h, pi)
    return int(((lam - 1) * h.net_cost).sum() * words_per_cut)


@dataclass(frozen=True)
class MiniBatchSpec:
    """Uniform vertex sampling without replacement, inducing the subgraph."""

    batch_size: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def sample_batches(n_vertices: int, spec: MiniBatchSpec, b: int, seed: int) -> list[np.ndarray]:
    """b sorted vertex samples; every vertex equally likely per batch."""
    if spec.batch_size > n_vertices:
        raise ValueError("batch_size exceeds vertex count")
    if b < 1:
        raise ValueError("need at least one batch")
    rng = np.random.default_rng([int(seed), 0xBA7C])
    return [
        np.sort(rng.choice(n_vertices, size=spec.batch_size, replace=False))
        for _ in range(b)
    ]


def induced_pattern(a: CsrMatrix, batch: np.ndarray, add_diagonal: bool = True) -> CsrMatrix:
    """Vertex-induced sub-pattern with unit values, indexed by position
    within the sorted batch; add_diagonal forces a full diagonal (self
    loops) as the column-net model requires."""
    batch = np.asarray(batch, dtype=np.int64)
    if len(batch) == 0:
        raise ValueError("empty batch")
    rows_out, cols_out = [], []
    for local_i, gi in enumerate(batch):
        cols, _ = a.row(int(gi))
        pos = np.searchsorted(batch, cols)
        keep = (pos < len(batch)) & (batch[np.minimum(pos, len(batch) - 1)] == cols)
        kept = pos[keep]
        rows_out.append(np.full(len(kept), local_i, dtype=np.int64))
        cols_out.append(kept)
    if add_diagonal:
        rows_out.append(np.arange(len(batch), dtype=np.int64))
        cols_out.append(np.arange(len(batch), dtype=np.int64))
    coo = CsrMatrix.from_coo(len(batch), len(batch), np.concatenate(rows_out), np.concatenate(cols_out))
    # collapse summed duplicates (diagonal may appear twice) back to units
    return CsrMatrix(
        len(batch), len(batch), coo.row_offsets, coo.col_indices, np.ones(coo.nnz)
    )


def build_stochastic_hypergraph(
    a: CsrMatrix, sampler: MiniBatchSpec, b: int, seed: int
) -> Hypergraph:
    """Merged hypergraph over the full vertex set: the nets of every sampled
    batch's column-net model concatenated, with full-batch vertex weights."""
    if a.n_rows != a.n_cols:
        raise ValueError("matrix must be square")
    nets: list[np.ndarray] = []
    for batch in sample_batches(a.n_rows, sampler, b, seed):
        sub = induced_pattern(a, batch)
        sub_h = build_hypergraph_model(sub)
        nets.extend(batch[pins] for pins in sub_h.nets)
    return Hypergraph(a.n_rows, tuple(nets), np.ones(len(nets)), a.row_nnz())


def hoeffding_min_nets(p: int, theta: float, delta: float) -> int:
    """Smallest net count estimating expected connectivity within theta
    at confidence 1 - delta: ceil((p-1)^2 / (2 theta^2) * ln(2/delta))."""
    if p < 2:
        raise ValueError("bound needs p >= 2 (with one part every connectivity is 1)")
    if not (theta > 0):
        raise ValueError("theta must be positive")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil((p - 1) ** 2 / (2.0 * theta**2) * math.log(2.0 / delta))
