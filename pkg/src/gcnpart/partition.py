"""Balanced p-way partitioners: random, graph FM, hypergraph FM, stochastic.

The internal partitioners use recursive bisection (p restricted to powers
of two; arbitrary p comes in via external partition files). Each bisection
is a seeded BFS region-growing split followed by flat Fiduccia-Mattheyses
passes: best-gain moves under the balance cap, every vertex moved at most
once per pass, rollback to the best prefix. The hypergraph engine
maintains per-net side pin counts so move gains are the exact change of
the connectivity-1 cut.

Each bisection side holding q leaf parts is capped at q * (1+eps) * W_avg
(its true leaf budget, so integer vertex weights never make intermediate
levels spuriously infeasible); a final k-way weight repair mops up
borderline leaves and the result is verified against the global cap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .models import (
    Hypergraph,
    MiniBatchSpec,
    Partition,
    UGraph,
    build_stochastic_hypergraph,
)
from .sparse import CsrMatrix


class BalanceInfeasibleError(ValueError):
    """Raised when no assignment can satisfy the balance constraint."""


@dataclass(frozen=True)
class PartitionConfig:
    p: int
    epsilon: float = 0.01
    seed: int = 0
    fm_passes: int = 8
    refinement: bool = True
    restarts: int = 3  # BFS seeds tried per bisection; best refined cut wins

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.fm_passes < 0:
            raise ValueError("fm_passes must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


# ---------------------------------------------------------------------------
# bisection engines


class GraphBisection:
    """Edge-cut state for a 2-way split of a (sub)graph.

    Maintains the cut and per-vertex move gains exactly under move();
    move() is its own inverse, which the FM rollback relies on.
    """

    def __init__(self, n: int, edges: np.ndarray, costs: np.ndarray, side: np.ndarray):
        self.n = n
        self.side = np.asarray(side, dtype=np.int8).copy()
        self.adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for (u, v), c in zip(edges, costs):
            self.adj[u].append((int(v), float(c)))
            self.adj[v].append((int(u), float(c)))
        self.gains = np.zeros(n)
        self._cut = 0.0
        for (u, v), c in zip(edges, costs):
            if self.side[u] != self.side[v]:
                self._cut += c
        for v in range(n):
            self.gains[v] = self._gain_of(v)

    def _gain_of(self, v: int) -> float:
        g = 0.0
        sv = self.side[v]
        for u, c in self.adj[v]:
            g += c if self.side[u] != sv else -c
        return g

    def cut(self) -> float:
        return self._cut

    def recompute_cut(self) -> float:
        total = 0.0
        for v in range(self.n):
            sv = self.side[v]
            for u, c in self.adj[v]:
                if u > v and self.side[u] != sv:
                    total += c
        return total

    def neighbors(self, v: int):
        for u, _ in self.adj[v]:
            yield u

    def move(self, v: int) -> None:
        self._cut -= self.gains[v]
        sv = self.side[v]
        for u, c in self.adj[v]:
            # u was on v's side: the edge turns cut; otherwise it turns internal
            self.gains[u] += 2.0 * c if self.side[u] == sv else -2.0 * c
        self.side[v] = 1 - sv
        self.gains[v] = -self.gains[v]


class HypergraphBisection:
    """Connectivity-1 cut state for a 2-way split of a (sub)hypergraph.

    Per-net side pin counts give O(pins) gain maintenance. For p = 2 the
    connectivity-1 cut is exactly the cost sum over nets with pins on both
    sides.
    """

    def __init__(self, n: int, pins: list[np.ndarray], costs: np.ndarray, side: np.ndarray):
        self.n = n
        self.pins = [np.asarray(p, dtype=np.int64) for p in pins]
        self.costs = np.asarray(costs, dtype=np.float64)
        self.side = np.asarray(side, dtype=np.int8).copy()
        self.nets_of: list[list[int]] = [[] for _ in range(n)]
        for j, p in enumerate(self.pins):
            for v in p:
                self.nets_of[int(v)].append(j)
        self.counts = np.zeros((len(self.pins), 2), dtype=np.int64)
        for j, p in enumerate(self.pins):
            self.counts[j, 0] = int((self.side[p] == 0).sum())
            self.counts[j, 1] = len(p) - self.counts[j, 0]
        self._cut = float(self.costs[(self.counts[:, 0] > 0) & (self.counts[:, 1] > 0)].sum())
        self.gains = np.array([self._gain_of(v) for v in range(n)])

    def _gain_of(self, v: int) -> float:
        sv = int(self.side[v])
        g = 0.0
        for j in self.nets_of[v]:
            if self.counts[j, 1 - sv] > 0:
                g += self.costs[j]
            if self.counts[j, sv] > 1:
                g -= self.costs[j]
        return g

    def cut(self) -> float:
        return self._cut

    def recompute_cut(self) -> float:
        total = 0.0
        for j, p in enumerate(self.pins):
            s = self.side[p]
            if (s == 0).any() and (s == 1).any():
                total += self.costs[j]
        return total

    def neighbors(self, v: int):
        for j in self.nets_of[v]:
            for u in self.pins[j]:
                if u != v:
                    yield int(u)

    def _single_pin_on(self, j: int, side_val: int, exclude: int) -> int:
        for u in self.pins[j]:
            u = int(u)
            if u != exclude and self.side[u] == side_val:
                return u
        raise AssertionError("pin count bookkeeping out of sync")

    def move(self, v: int) -> None:
        sv = int(self.side[v])
        ov = 1 - sv
        for j in self.nets_of[v]:
            c = self.costs[j]
            f, t = int(self.counts[j, sv]), int(self.counts[j, ov])
            was_cut = t > 0
            if t == 0:
                for u in self.pins[j]:
                    if u != v:
                        self.gains[int(u)] += c
            elif t == 1:
                self.gains[self._single_pin_on(j, ov, v)] -= c
            self.counts[j, sv] = f - 1
            self.counts[j, ov] = t + 1
            if f - 1 == 0:
                for u in self.pins[j]:
                    if u != v:
                        self.gains[int(u)] -= c
            elif f - 1 == 1:
                self.gains[self._single_pin_on(j, sv, v)] += c
            is_cut = (f - 1) > 0
            self._cut += c * (int(is_cut) - int(was_cut))
        self.side[v] = ov
        self.gains[v] = self._gain_of(v)


# ---------------------------------------------------------------------------
# bisection driver


def _grow_bfs(engine, weights: np.ndarray, rng, min_count: int, target: float) -> None:
    """Grow side 0 from a seeded vertex until its weight is closest to target.

    engine.side must start all ones; visits jump to the lowest unvisited
    vertex when a component is exhausted.
    """
    n = len(weights)
    visited = np.zeros(n, dtype=bool)
    seed = int(rng.integers(0, n))
    queue = deque([seed])
    visited[seed] = True
    acc = 0.0
    taken = 0
    while True:
        if not queue:
            rest = np.flatnonzero(~visited)
            if len(rest) == 0:
                break
            queue.append(int(rest[0]))
            visited[rest[0]] = True
        v = queue.popleft()
        w = float(weights[v])
        closer = abs(acc + w - target) < abs(acc - target)
        if not closer and taken >= min_count:
            break
        engine.side[v] = 0
        acc += w
        taken += 1
        for u in sorted(set(engine.neighbors(v))):
            if not visited[u]:
                visited[u] = True
                queue.append(u)
        if taken >= n - min_count:
            break
    # counts/gains are rebuilt by the caller after seeding sides


def _repair_sides(side, weights, cap, min_count) -> None:
    """Shift weight off the heavy side while either side exceeds the cap.

    Each move picks the heavy-side vertex whose weight is closest to half
    the imbalance (ties to the lower id), which strictly reduces the
    heavier side. Best effort: stops when no single move helps (the final
    k-way repair and balance check decide whether that was fatal).
    """
    w = [float(weights[side == 0].sum()), float(weights[side == 1].sum())]
    while max(w) > cap:
        heavy = 0 if w[0] >= w[1] else 1
        members = np.flatnonzero(side == heavy)
        if len(members) <= min_count:
            return
        diff = w[heavy] - w[1 - heavy]
        # any 0 < w(v) < diff reduces the heavy side without flipping roles
        score = np.abs(weights[members] - diff / 2.0)
        v = int(members[np.lexsort((members, score))][0])
        if not (0 < weights[v] < diff):
            return
        side[v] = 1 - heavy
        w[heavy] -= weights[v]
        w[1 - heavy] += weights[v]


def _fm_passes(engine, weights, cap, min_count, max_passes: int) -> None:
    """Best-gain passes with rollback to the best balanced prefix.

    Moves may overshoot the cap by one vertex weight mid-pass (the classic
    loosening; a strictly capped balanced split would admit no move at
    all), but only prefixes meeting the cap and the side minimum count are
    eligible as pass results, so each pass ends balanced and never above
    its starting cut.
    """
    n = engine.n
    side_w = np.array(
        [float(weights[engine.side == 0].sum()), float(weights[engine.side == 1].sum())]
    )
    side_n = np.array([int((engine.side == 0).sum()), int((engine.side == 1).sum())])
    cap_move = max(cap, float(side_w.sum()) / 2.0 + float(weights.max(initial=0.0)))

    def balanced() -> bool:
        return bool(side_w.max() <= cap and side_n.min() >= min_count)

    for _ in range(max_passes):
        start_cut = engine.cut()
        best_cut = start_cut
        best_len = 0
        moves: list[int] = []
        locked = np.zeros(n, dtype=bool)
        while True:
            src = engine.side.astype(np.int64)
            legal = (
                ~locked
                & (side_w[1 - src] + weights <= cap_move)
                & (side_n[src] - 1 >= 1)
            )
            if not legal.any():
                break
            masked = np.where(legal, engine.gains, -np.inf)
            v = int(np.argmax(masked))  # first max = lowest vertex id
            s = int(engine.side[v])
            engine.move(v)
            side_w[s] -= weights[v]
            side_w[1 - s] += weights[v]
            side_n[s] -= 1
            side_n[1 - s] += 1
            locked[v] = True
            moves.append(v)
            if balanced() and engine.cut() < best_cut - 1e-9:
                best_cut = engine.cut()
                best_len = len(moves)
        for v in reversed(moves[best_len:]):
            s = int(engine.side[v])
            engine.move(v)
            side_w[s] -= weights[v]
            side_w[1 - s] += weights[v]
            side_n[s] -= 1
            side_n[1 - s] += 1
        if not (best_cut < start_cut - 1e-9):
            break


def _recursive_bisect(
    ids: np.ndarray,
    p_sub: int,
    part_base: int,
    assignment: np.ndarray,
    weights: np.ndarray,
    restrict_and_build,
    cap_leaf: float,
    rng,
    cfg: PartitionConfig,
) -> None:
    if p_sub == 1:
        assignment[ids] = part_base
        return
    sub_w = weights[ids].astype(np.float64)
    total = float(sub_w.sum())
    cap = (p_sub // 2) * cap_leaf  # each side's true leaf budget
    min_count = p_sub // 2
    if len(ids) < p_sub:
        raise BalanceInfeasibleError("fewer vertices than parts in a bisection")

    best_engine = None
    best_key = None
    for _ in range(cfg.restarts):
        engine = restrict_and_build(ids, np.ones(len(ids), dtype=np.int8))
        _grow_bfs(engine, sub_w, rng, min_count, total / 2.0)
        side = engine.side.copy()
        _repair_sides(side, sub_w, cap, min_count)
        engine = restrict_and_build(ids, side)
        if cfg.refinement and cfg.fm_passes > 0:
            _fm_passes(engine, sub_w, cap, min_count, cfg.fm_passes)
        # a balanced split always beats an unbalanced one, then lowest cut
        w0 = float(sub_w[engine.side == 0].sum())
        unbalanced = max(w0, total - w0) > cap
        key = (unbalanced, engine.cut())
        if best_key is None or key < (best_key[0], best_key[1] - 1e-9):
            best_engine = engine
            best_key = key
    engine = best_engine
    left = ids[engine.side == 0]
    right = ids[engine.side == 1]
    _recursive_bisect(
        left, p_sub // 2, part_base, assignment, weights, restrict_and_build,
        cap_leaf, rng, cfg,
    )
    _recursive_bisect(
        right, p_sub // 2, part_base + p_sub // 2, assignment, weights,
        restrict_and_build, cap_leaf, rng, cfg,
    )


def _final_repair(assignment, weights, p: int, epsilon: float) -> np.ndarray:
    """Greedy k-way weight repair; raises if balance stays infeasible."""
    assignment = assignment.copy()
    weights = np.asarray(weights, dtype=np.int64)
    pw = np.zeros(p, dtype=np.float64)
    np.add.at(pw, assignment, weights.astype(np.float64))
    counts = np.bincount(assignment, minlength=p)
    cap = (1.0 + epsilon) * weights.sum() / p

    # every part must end non-empty
    while (counts == 0).any():
        empty = int(np.argmax(counts == 0))
        movable = np.flatnonzero(counts[assignment] >= 2)
        if len(movable) == 0:
            raise BalanceInfeasibleError("cannot populate every part")
        v = int(movable[np.lexsort((movable, weights[movable]))][0])
        counts[assignment[v]] -= 1
        pw[assignment[v]] -= weights[v]
        assignment[v] = empty
        counts[empty] += 1
        pw[empty] += weights[v]

    def violation() -> float:
        return float(np.maximum(pw - cap, 0.0).sum())

    def delta_violation(m: int, t: int, shift: float) -> float:
        """Violation change when `shift` weight leaves part m for part t."""
        dm = max(0.0, pw[m] - shift - cap) - max(0.0, pw[m] - cap)
        dt = max(0.0, pw[t] + shift - cap) - max(0.0, pw[t] - cap)
        return dm + dt

    while violation() > 0:
        before = violation()
        # overweight parts heaviest-first; their vertices lightest-first;
        # targets lightest-first: apply the first strictly improving move
        over = np.flatnonzero(pw > cap)
        over = over[np.argsort(-pw[over], kind="stable")]
        moved = False
        for m in over:
            m = int(m)
            members = np.flatnonzero(assignment == m)
            if len(members) < 2:
                continue
            cand = members[np.lexsort((members, weights[members]))]
            targets = np.lexsort((np.arange(p), pw))
            for v in cand:
                v = int(v)
                for t in targets:
                    t = int(t)
                    if t == m:
                        continue
                    if delta_violation(m, t, float(weights[v])) < 0:
                        pw[m] -= weights[v]
                        pw[t] += weights[v]
                        counts[m] -= 1
                        counts[t] += 1
                        assignment[v] = t
                        moved = True
                        break
                if moved:
                    break
            if moved:
                break
        if not moved:
            # single moves stuck (chunky weights): exchange a heavy vertex of
            # an overweight part for a lighter one elsewhere
            for m in over:
                m = int(m)
                members = np.flatnonzero(assignment == m)
                cand = members[np.lexsort((members, -weights[members]))]
                targets = np.lexsort((np.arange(p), pw))
                for v in cand:
                    v = int(v)
                    for t in targets:
                        t = int(t)
                        if t == m:
                            continue
                        others = np.flatnonzero(assignment == t)
                        others = others[weights[others] < weights[v]]
                        if len(others) == 0:
                            continue
                        others = others[np.lexsort((others, weights[others]))]
                        for u in others:
                            u = int(u)
                            shift = float(weights[v] - weights[u])
                            if delta_violation(m, t, shift) < 0:
                                pw[m] += weights[u] - weights[v]
                                pw[t] += weights[v] - weights[u]
                                assignment[v] = t
                                assignment[u] = m
                                moved = True
                                break
                        if moved:
                            break
                    if moved:
                        break
                if moved:
                    break
        if not moved:
            raise BalanceInfeasibleError("balance repair cannot make progress")
        assert violation() < before
    return assignment


def _require_power_of_two(p: int) -> None:
    if p & (p - 1):
        raise ValueError(
            f"internal partitioners use recursive bisection and need p to be a "
            f"power of two (got {p}); use an external partition file for other p"
        )


def random_partition(weights, cfg: PartitionConfig) -> Partition:
    """Seeded uniform assignment plus greedy weight repair."""
    weights = np.asarray(weights, dtype=np.int64)
    n = len(weights)
    if cfg.p > n:
        raise ValueError(f"p={cfg.p} exceeds vertex count {n}")
    if cfg.p == 1:
        return Partition.from_assignment(np.zeros(n, dtype=np.int64), weights, 1, cfg.epsilon)
    rng = np.random.default_rng([int(cfg.seed), 0x5250])
    assignment = rng.integers(0, cfg.p, size=n).astype(np.int64)
    assignment = _final_repair(assignment, weights, cfg.p, cfg.epsilon)
    return Partition.from_assignment(assignment, weights, cfg.p, cfg.epsilon)


def _partition_by_bisection(n, weights, restrict_and_build, cfg: PartitionConfig, tag: int) -> Partition:
    if cfg.p > n:
        raise ValueError(f"p={cfg.p} exceeds vertex count {n}")
    weights = np.asarray(weights, dtype=np.int64)
    if cfg.p == 1:
        return Partition.from_assignment(np.zeros(n, dtype=np.int64), weights, 1, cfg.epsilon)
    _require_power_of_two(cfg.p)
    cap_leaf = (1.0 + cfg.epsilon) * float(weights.sum()) / cfg.p
    rng = np.random.default_rng([int(cfg.seed), tag])
    assignment = np.full(n, -1, dtype=np.int64)
    _recursive_bisect(
        np.arange(n, dtype=np.int64), cfg.p, 0, assignment, weights,
        restrict_and_build, cap_leaf, rng, cfg,
    )
    pi = Partition.from_assignment(assignment, weights, cfg.p, cfg.epsilon)
    if not pi.is_balanced():
        assignment = _final_repair(assignment, weights, cfg.p, cfg.epsilon)
        pi = Partition.from_assignment(assignment, weights, cfg.p, cfg.epsilon)
        if not pi.is_balanced():
            raise BalanceInfeasibleError("partition violates the balance constraint")
    return pi


def partition_graph_fm(g: UGraph, cfg: PartitionConfig) -> Partition:
    """Recursive bisection with edge-cut FM refinement."""

    def restrict_and_build(ids: np.ndarray, side: np.ndarray) -> GraphBisection:
        pos = {int(gid): i for i, gid in enumerate(ids)}
        sel_edges = []
        sel_costs = []
        for (u, v), c in zip(g.edges, g.edge_cost):
            lu, lv = pos.get(int(u)), pos.get(int(v))
            if lu is not None and lv is not None:
                sel_edges.append((lu, lv))
                sel_costs.append(c)
        edges = np.asarray(sel_edges, dtype=np.int64).reshape(-1, 2)
        return GraphBisection(len(ids), edges, np.asarray(sel_costs), side)

    return _partition_by_bisection(g.n_vertices, g.vertex_weight, restrict_and_build, cfg, 0x4750)


def partition_hypergraph_fm(h: Hypergraph, cfg: PartitionConfig) -> Partition:
    """Recursive bisection with connectivity-1 FM refinement."""

    def restrict_and_build(ids: np.ndarray, side: np.ndarray) -> HypergraphBisection:
        pins_out = []
        costs_out = []
        for pins, c in zip(h.nets, h.net_cost):
            pos = np.searchsorted(ids, pins)
            keep = (pos < len(ids)) & (ids[np.minimum(pos, len(ids) - 1)] == pins)
            local = pos[keep]
            if len(local) >= 2:  # nets with <2 active pins cannot be cut here
                pins_out.append(local)
                costs_out.append(c)
        return HypergraphBisection(len(ids), pins_out, np.asarray(costs_out), side)

    return _partition_by_bisection(h.n_vertices, h.vertex_weight, restrict_and_build, cfg, 0x4850)


def partition_stochastic(
    a: CsrMatrix, sampler: MiniBatchSpec, b: int, cfg: PartitionConfig
) -> Partition:
    """Partition the merged hypergraph of b sampled batches (SHP).

    Vertices that no batch sampled carry no nets and are placed by weight
    alone.
    """
    if b < 1:
        raise ValueError("stochastic partitioning needs at least one batch")
    merged = build_stochastic_hypergraph(a, sampler, b, cfg.seed)
    return partition_hypergraph_fm(merged, cfg)
