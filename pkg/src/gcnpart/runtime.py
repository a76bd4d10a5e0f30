"""Deterministic simulated distributed-memory GCN training runtime.

p logical processors execute parallel feedforward and backpropagation over
1D row-partitioned matrices. Cross-rank data moves only through SimNetwork:
per-pair FIFO channels for point-to-point row transfers plus a rank-ordered
allreduce-sum for weight gradients. Every payload is counted (rows x cols
words), giving exact communication accounting per epoch, phase, and layer.

Two schedulers run the same per-rank step functions:

* "round": single-threaded; for each layer all ranks post sends, then all
  ranks compute and drain their receives.
* "threads": one worker per rank with blocking receives and barrier-backed
  allreduce.

Both receive in ascending sender rank and reduce in ascending rank order,
so results are bit-identical across schedulers and reruns. (Nothing forces
a receive order on a real network; fixing one trades away out-of-order
receipt for reproducible floating point.)
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .comm import CommPlan, build_comm_plan
from .gcn import GcnModel, LabelSet, activation_and_derivative
from .models import MiniBatchSpec, Partition, induced_pattern
from .sparse import (
    CsrMatrix,
    RowBlock,
    dense,
    gather_rows,
    normalize_adjacency,
    spmm,
    transpose_sparse,
)

SCHEDULERS = ("round", "threads")


class CommError(RuntimeError):
    """A rank did not receive a message its plan promised, or got a bad one."""


@dataclass(frozen=True)
class MessageRecord:
    epoch: int
    step: int
    phase: str  # "fwd" or "bwd"
    layer: int
    src: int
    dst: int
    rows: int
    cols: int

    @property
    def words(self) -> int:
        return self.rows * self.cols


class SimNetwork:
    """Per-pair FIFO channels with full send accounting.

    Channels are unbounded; a rank blocks only on receiving an expected
    message (in "threads" mode; the round scheduler never needs to block
    because sends are globally ordered before receives).
    """

    def __init__(self, p: int):
        self.p = p
        self._queues = {(s, d): queue.Queue() for s in range(p) for d in range(p) if s != d}
        self.log: list[MessageRecord] = []
        self._log_lock = threading.Lock()
        self.blocking = False
        self._barrier: threading.Barrier | None = None
        self._slots: list = [None] * p
        self._failure: BaseException | None = None

    def send(self, src: int, dst: int, payload: np.ndarray, tag) -> None:
        if src == dst:
            raise CommError("a rank never messages itself")
        rec = MessageRecord(*tag, src=src, dst=dst, rows=payload.shape[0], cols=payload.shape[1])
        with self._log_lock:
            self.log.append(rec)
        self._queues[(src, dst)].put((tag, payload))

    def recv(self, dst: int, src: int, tag, expect_shape) -> np.ndarray:
        try:
            got_tag, payload = self._queues[(src, dst)].get(
                block=self.blocking, timeout=60.0 if self.blocking else None
            )
        except queue.Empty:
            raise CommError(
                f"rank {dst} expected a message from rank {src} at {tag} but none arrived"
            ) from None
        if got_tag != tag:
            raise CommError(f"rank {dst} got message tagged {got_tag}, expected {tag}")
        if payload.shape != expect_shape:
            raise CommError(
                f"payload from {src} to {dst} has shape {payload.shape}, expected {expect_shape}"
            )
        return payload

    # -- allreduce (threads mode); the round scheduler sums directly --

    def setup_workers(self) -> None:
        self.blocking = True
        self._barrier = threading.Barrier(self.p)
        self._failure = None

    def teardown_workers(self) -> None:
        self.blocking = False
        self._barrier = None

    def abort(self, exc: BaseException) -> None:
        if self._failure is None:
            self._failure = exc
        if self._barrier is not None:
            self._barrier.abort()

    def allreduce(self, rank: int, contribution: np.ndarray) -> np.ndarray:
        assert self._barrier is not None, "allreduce outside worker mode"
        self._slots[rank] = contribution
        self._barrier.wait(timeout=60.0)
        out = allreduce_sum(self._slots)
        self._barrier.wait(timeout=60.0)
        return out

    # -- accounting --

    def records(self, epoch: int | None = None, step: int | None = None) -> list[MessageRecord]:
        with self._log_lock:
            recs = list(self.log)
        if epoch is not None:
            recs = [r for r in recs if r.epoch == epoch]
        if step is not None:
            recs = [r for r in recs if r.step == step]
        return recs


def allreduce_sum(contributions) -> np.ndarray:
    """Elementwise sum accumulated in ascending rank order."""
    mats = [dense(c) for c in contributions]
    shape = mats[0].shape
    for c in mats[1:]:
        if c.shape != shape:
            raise ValueError(f"allreduce shape mismatch: {c.shape} vs {shape}")
    out = mats[0].copy()
    for c in mats[1:]:
        out += c
    return out


@dataclass
class ProcState:
    """Everything one simulated processor stores.

    Row blocks follow the partition; the split CSR operands index received
    payload rows positionally against the sorted send lists of the plan.
    Weight replicas are private copies, kept identical across ranks by the
    deterministic allreduce.
    """

    rank: int
    global_rows: np.ndarray
    plan_fwd: CommPlan
    plan_bwd: CommPlan
    a_fwd_local: CsrMatrix
    a_fwd_recv: dict[int, CsrMatrix]
    a_bwd_local: CsrMatrix
    a_bwd_recv: dict[int, CsrMatrix]
    dims: tuple[int, ...]
    activation: str
    learning_rate: float
    weights: list[np.ndarray]
    h0: np.ndarray
    h: list = field(default_factory=list)
    z: list = field(default_factory=list)
    g: list = field(default_factory=list)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1


@dataclass(frozen=True)
class EpochMetrics:
    total_words: int
    max_words_per_proc: int
    avg_words_per_proc: float
    total_msgs: int
    max_msgs_per_proc: int
    wallclock: float
    loss: float


def _split_columns(rows: np.ndarray, a: CsrMatrix, groups: list[np.ndarray]) -> list[CsrMatrix]:
    """Restrict the row block a[rows, :] to each column group, remapping the
    group's (sorted) global columns to positions 0..len(group)-1."""
    entries_r = []
    entries_c = []
    for local_i, gi in enumerate(rows):
        cols, _ = a.row(int(gi))
        entries_r.append(np.full(len(cols), local_i, dtype=np.int64))
        entries_c.append(cols)
    all_r = np.concatenate(entries_r) if entries_r else np.zeros(0, dtype=np.int64)
    all_c = np.concatenate(entries_c) if entries_c else np.zeros(0, dtype=np.int64)
    all_v_rows = []
    for gi in rows:
        _, vals = a.row(int(gi))
        all_v_rows.append(vals)
    all_v = np.concatenate(all_v_rows) if all_v_rows else np.zeros(0)
    out = []
    for group in groups:
        group = np.asarray(group, dtype=np.int64)
        if len(group) == 0:
            out.append(CsrMatrix(len(rows), 0, np.zeros(len(rows) + 1, dtype=np.int64), [], []))
            continue
        pos = np.searchsorted(group, all_c)
        keep = (pos < len(group)) & (group[np.minimum(pos, len(group) - 1)] == all_c)
        out.append(
            CsrMatrix.from_coo(len(rows), len(group), all_r[keep], pos[keep], all_v[keep])
        )
    return out


def scatter(
    a_hat: CsrMatrix,
    h0: np.ndarray,
    pi: "Partition | np.ndarray",
    model: GcnModel,
    directed: bool = False,
    p: int | None = None,
) -> list[ProcState]:
    """Distribute row blocks per the partition and replicate the weights."""
    h0 = dense(h0)
    if h0.shape != (a_hat.n_rows, model.dims[0]):
        raise ValueError(f"h0 has shape {h0.shape}, expected ({a_hat.n_rows}, {model.dims[0]})")
    plan_fwd = build_comm_plan(a_hat, pi, p)
    if directed:
        a_bwd = transpose_sparse(a_hat)
        plan_bwd = build_comm_plan(a_bwd, pi, p)
    else:
        a_bwd, plan_bwd = a_hat, plan_fwd
    states = []
    for m in range(plan_fwd.p):
        rows = plan_fwd.rows_of(m)
        fwd_groups = [rows] + [plan_fwd.send[n][m] for n in plan_fwd.recv_from[m]]
        fwd_split = _split_columns(rows, a_hat, fwd_groups)
        bwd_groups = [rows] + [plan_bwd.send[n][m] for n in plan_bwd.recv_from[m]]
        bwd_split = _split_columns(rows, a_bwd, bwd_groups)
        states.append(
            ProcState(
                rank=m,
                global_rows=rows,
                plan_fwd=plan_fwd,
                plan_bwd=plan_bwd,
                a_fwd_local=fwd_split[0],
                a_fwd_recv=dict(zip(map(int, plan_fwd.recv_from[m]), fwd_split[1:])),
                a_bwd_local=bwd_split[0],
                a_bwd_recv=dict(zip(map(int, plan_bwd.recv_from[m]), bwd_split[1:])),
                dims=model.dims,
                activation=model.activation,
                learning_rate=model.learning_rate,
                weights=[w.copy() for w in model.weights],
                h0=h0[rows].copy(),
            )
        )
    return states


# ---------------------------------------------------------------------------
# per-rank step functions (shared by both schedulers)


def _reset_trace(st: ProcState) -> None:
    L = st.n_layers
    st.h = [st.h0] + [None] * L
    st.z = [None] * (L + 1)
    st.g = [None] * (L + 1)


def _fwd_send(st: ProcState, net: SimNetwork, k: int, tag) -> None:
    block = RowBlock(st.global_rows, st.h[k - 1])
    for dst in range(st.plan_fwd.p):
        ids = st.plan_fwd.send[st.rank][dst]
        if len(ids):
            net.send(st.rank, dst, gather_rows(block, ids), tag)


def _fwd_compute(st: ProcState, net: SimNetwork, k: int, tag) -> None:
    w = st.weights[k - 1]
    z = spmm(st.a_fwd_local, st.h[k - 1]) @ w
    for src in st.plan_fwd.recv_from[st.rank]:
        src = int(src)
        n_rows = len(st.plan_fwd.send[src][st.rank])
        payload = net.recv(st.rank, src, tag, (n_rows, st.dims[k - 1]))
        z = z + spmm(st.a_fwd_recv[src], payload) @ w
    st.z[k] = z
    st.h[k], _ = activation_and_derivative(st.activation, z)


def _local_loss_grad(st: ProcState, labels: LabelSet, n_labeled_global: int):
    """Local NLL sum and d loss / d H^L rows for locally owned labeled
    vertices (normalized by the global labeled count)."""
    L = st.n_layers
    h_last = st.h[L]
    grad = np.zeros_like(h_last)
    local_sum = 0.0
    if n_labeled_global > 0 and len(labels) and len(st.global_rows):
        pos = np.searchsorted(st.global_rows, labels.labeled_ids)
        mine = (pos < len(st.global_rows)) & (
            st.global_rows[np.minimum(pos, len(st.global_rows) - 1)] == labels.labeled_ids
        )
        if mine.any():
            local_rows = pos[mine]
            y = labels.labels[mine]
            logits = h_last[local_rows]
            shifted = logits - logits.max(axis=1, keepdims=True)
            logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            local_sum = float(-logp[np.arange(len(y)), y].sum())
            softmax = np.exp(logp)
            softmax[np.arange(len(y)), y] -= 1.0
            grad[local_rows] = softmax / n_labeled_global
    _, d_act = activation_and_derivative(st.activation, st.z[L])
    st.g[L] = grad * d_act
    return np.array([[local_sum]])


def _bwd_send(st: ProcState, net: SimNetwork, k: int, tag) -> None:
    block = RowBlock(st.global_rows, st.g[k])
    for dst in range(st.plan_bwd.p):
        ids = st.plan_bwd.send[st.rank][dst]
        if len(ids):
            net.send(st.rank, dst, gather_rows(block, ids), tag)


def _bwd_compute(st: ProcState, net: SimNetwork, k: int, tag) -> np.ndarray:
    """Aggregate A_m G^k, derive G^{k-1}, return the local dW^k part."""
    aggregated = spmm(st.a_bwd_local, st.g[k])
    for src in st.plan_bwd.recv_from[st.rank]:
        src = int(src)
        n_rows = len(st.plan_bwd.send[src][st.rank])
        payload = net.recv(st.rank, src, tag, (n_rows, st.dims[k]))
        aggregated = aggregated + spmm(st.a_bwd_recv[src], payload)
    if k > 1:
        s = aggregated @ st.weights[k - 1].T
        _, d_prev = activation_and_derivative(st.activation, st.z[k - 1])
        st.g[k - 1] = s * d_prev
    return st.h[k - 1].T @ aggregated


def _apply_update(st: ProcState, k: int, dw: np.ndarray) -> None:
    st.weights[k - 1] = st.weights[k - 1] - st.learning_rate * dw


# ---------------------------------------------------------------------------
# schedulers


def _run_epoch_round(states, net, labels, n_labeled_global, epoch, step) -> float:
    L = states[0].n_layers
    for st in states:
        _reset_trace(st)
    for k in range(1, L + 1):
        tag = (epoch, step, "fwd", k)
        for st in states:
            _fwd_send(st, net, k, tag)
        for st in states:
            _fwd_compute(st, net, k, tag)
    sums = [_local_loss_grad(st, labels, n_labeled_global) for st in states]
    total = allreduce_sum(sums)
    loss = float(total[0, 0]) / n_labeled_global if n_labeled_global else 0.0
    for k in range(L, 0, -1):
        tag = (epoch, step, "bwd", k)
        for st in states:
            _bwd_send(st, net, k, tag)
        parts = [_bwd_compute(st, net, k, tag) for st in states]
        dw = allreduce_sum(parts)
        for st in states:
            _apply_update(st, k, dw)
    return loss


def _rank_epoch_threaded(st, net, labels, n_labeled_global, epoch, step, losses) -> None:
    L = st.n_layers
    _reset_trace(st)
    for k in range(1, L + 1):
        tag = (epoch, step, "fwd", k)
        _fwd_send(st, net, k, tag)
        _fwd_compute(st, net, k, tag)
    local = _local_loss_grad(st, labels, n_labeled_global)
    total = net.allreduce(st.rank, local)
    losses[st.rank] = float(total[0, 0]) / n_labeled_global if n_labeled_global else 0.0
    for k in range(L, 0, -1):
        tag = (epoch, step, "bwd", k)
        _bwd_send(st, net, k, tag)
        part = _bwd_compute(st, net, k, tag)
        dw = net.allreduce(st.rank, part)
        _apply_update(st, k, dw)


def _run_workers(states, net: SimNetwork, rank_fn) -> None:
    """Run rank_fn(state) on one worker thread per rank; the first failure
    aborts the barrier so no thread is left blocked, then re-raises."""
    net.setup_workers()

    def worker(st):
        try:
            rank_fn(st)
        except BaseException as exc:
            net.abort(exc)

    threads = [threading.Thread(target=worker, args=(st,), daemon=True) for st in states]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=120.0)
    failure = net._failure
    net.teardown_workers()
    if failure is not None:
        raise failure


def _run_epoch_threads(states, net, labels, n_labeled_global, epoch, step) -> float:
    losses = [None] * len(states)
    _run_workers(
        states,
        net,
        lambda st: _rank_epoch_threaded(
            st, net, labels, n_labeled_global, epoch, step, losses
        ),
    )
    return losses[0]


def _run_epoch(states, net, labels, n_labeled_global, epoch, step, scheduler) -> float:
    if scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    run = _run_epoch_round if scheduler == "round" else _run_epoch_threads
    return run(states, net, labels, n_labeled_global, epoch, step)


# ---------------------------------------------------------------------------
# public operations


def parallel_feedforward(states, net: SimNetwork, scheduler: str = "round", epoch: int = 0):
    """One forward pass over all layers; fills each rank's h/z blocks."""
    L = states[0].n_layers
    if scheduler == "round":
        for st in states:
            _reset_trace(st)
        for k in range(1, L + 1):
            tag = (epoch, 0, "fwd", k)
            for st in states:
                _fwd_send(st, net, k, tag)
            for st in states:
                _fwd_compute(st, net, k, tag)
    else:

        def rank_forward(st):
            _reset_trace(st)
            for k in range(1, L + 1):
                tag = (epoch, 0, "fwd", k)
                _fwd_send(st, net, k, tag)
                _fwd_compute(st, net, k, tag)

        _run_workers(states, net, rank_forward)
    return states


def parallel_backprop(states, net: SimNetwork, labels: LabelSet, scheduler: str = "round", epoch: int = 0):
    """Loss gradient, backward sweep, allreduced updates; forward trace must
    be present. Returns the states and the epoch's metrics."""
    if not all(st.h and st.h[-1] is not None for st in states):
        raise ValueError("run parallel_feedforward before parallel_backprop")
    n_labeled_global = len(labels)
    if n_labeled_global == 0:
        raise ValueError("label set is empty")
    start = time.perf_counter()
    L = states[0].n_layers
    if scheduler == "round":
        sums = [_local_loss_grad(st, labels, n_labeled_global) for st in states]
        loss = float(allreduce_sum(sums)[0, 0]) / n_labeled_global
        for k in range(L, 0, -1):
            tag = (epoch, 0, "bwd", k)
            for st in states:
                _bwd_send(st, net, k, tag)
            parts = [_bwd_compute(st, net, k, tag) for st in states]
            dw = allreduce_sum(parts)
            for st in states:
                _apply_update(st, k, dw)
    else:
        losses = [None] * len(states)

        def rank_backward(st):
            local = _local_loss_grad(st, labels, n_labeled_global)
            total = net.allreduce(st.rank, local)
            losses[st.rank] = float(total[0, 0]) / n_labeled_global
            for k in range(L, 0, -1):
                tag = (epoch, 0, "bwd", k)
                _bwd_send(st, net, k, tag)
                part = _bwd_compute(st, net, k, tag)
                dw = net.allreduce(st.rank, part)
                _apply_update(st, k, dw)

        _run_workers(states, net, rank_backward)
        loss = losses[0]
    wall = time.perf_counter() - start
    recs = [r for r in net.records(epoch=epoch) if r.phase == "bwd"]
    return states, _metrics_from_records(recs, len(states), wall, loss)


def _metrics_from_records(recs, p: int, wall: float, loss: float) -> EpochMetrics:
    words = np.zeros(p, dtype=np.int64)
    msgs = np.zeros(p, dtype=np.int64)
    for r in recs:
        words[r.src] += r.words
        msgs[r.src] += 1
    return EpochMetrics(
        total_words=int(words.sum()),
        max_words_per_proc=int(words.max()) if p else 0,
        avg_words_per_proc=float(words.sum() / p),
        total_msgs=int(msgs.sum()),
        max_msgs_per_proc=int(msgs.max()) if p else 0,
        wallclock=wall,
        loss=loss,
    )


@dataclass(frozen=True)
class FullBatch:
    pass


@dataclass(frozen=True)
class MiniBatch:
    """Per-step vertex sampling; the fixed global partition is restricted to
    each batch's induced sub-adjacency."""

    spec: MiniBatchSpec
    batches_per_epoch: int
    seed: int
    adjacency: CsrMatrix  # raw pattern (no self loops); renormalized per batch
    features: np.ndarray
    owner: np.ndarray
    directed: bool = False


def _local_labelset(labels: LabelSet, batch: np.ndarray) -> "LabelSet | None":
    pos = np.searchsorted(batch, labels.labeled_ids)
    mine = (pos < len(batch)) & (batch[np.minimum(pos, len(batch) - 1)] == labels.labeled_ids)
    if not mine.any():
        return None
    return LabelSet(pos[mine], labels.labels[mine], labels.n_classes)


def train_epochs(
    states,
    net: SimNetwork,
    labels: LabelSet,
    epochs: int,
    mode: "FullBatch | MiniBatch" = FullBatch(),
    scheduler: str = "round",
) -> list[EpochMetrics]:
    """Train for the given number of epochs, recording metrics per epoch.

    Full-batch mode runs one forward+backward over the whole graph per
    epoch. Mini-batch mode samples batches_per_epoch induced subgraphs per
    epoch and performs one update per batch; weights live in the persistent
    states between batches.
    """
    out = []
    p = len(states)
    if isinstance(mode, FullBatch):
        n_labeled_global = len(labels)
        if n_labeled_global == 0:
            raise ValueError("label set is empty")
        for e in range(epochs):
            start = time.perf_counter()
            loss = _run_epoch(states, net, labels, n_labeled_global, e, 0, scheduler)
            wall = time.perf_counter() - start
            out.append(_metrics_from_records(net.records(epoch=e), p, wall, loss))
        return out

    rng = np.random.default_rng([int(mode.seed), 0x7B])
    for e in range(epochs):
        start = time.perf_counter()
        losses = []
        for step in range(mode.batches_per_epoch):
            batch = np.sort(
                rng.choice(mode.adjacency.n_rows, size=mode.spec.batch_size, replace=False)
            )
            sub_raw = induced_pattern(mode.adjacency, batch, add_diagonal=False)
            sub_hat = normalize_adjacency(sub_raw, add_self_loops=True)
            model = GcnModel(
                states[0].dims,
                tuple(states[0].weights),
                states[0].activation,
                states[0].learning_rate,
            )
            sub_states = scatter(
                sub_hat,
                mode.features[batch],
                mode.owner[batch],
                model,
                directed=mode.directed,
                p=p,
            )
            sub_labels = _local_labelset(labels, batch)
            n_lab = len(sub_labels) if sub_labels is not None else 0
            effective = sub_labels if sub_labels is not None else LabelSet(
                np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), labels.n_classes
            )
            loss = _run_epoch(sub_states, net, effective, n_lab, e, step, scheduler)
            losses.append(loss)
            for st, sub in zip(states, sub_states):
                st.weights = [w.copy() for w in sub.weights]
        wall = time.perf_counter() - start
        out.append(
            _metrics_from_records(
                net.records(epoch=e), p, wall, float(np.mean(losses)) if losses else 0.0
            )
        )
    return out
