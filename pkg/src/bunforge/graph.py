"""Weekly directed user graphs built from transactions plus cluster state.

Each transaction contributes one edge from the sending user to every
distinct receiving user among its non-change outputs. Change outputs map
back to the sender, and self-loops and parallel edges are excluded: the
graph is an unweighted edge set over users.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clustering import ClusterState, change_output_index
from .errors import UnknownAddressError, ValidationError
from .ingest import PATTERN_KEYS, TxRecord


@dataclass
class UserGraphSnapshot:
    week: int
    nodes: set[int] = field(default_factory=set)
    edges: set[tuple[int, int]] = field(default_factory=set)
    in_deg: dict[int, int] = field(default_factory=dict)
    out_deg: dict[int, int] = field(default_factory=dict)
    mode: str = "cumulative"

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def total_degree(self, node: int) -> int:
        return self.in_deg[node] + self.out_deg[node]


def _recompute_degrees(g: UserGraphSnapshot) -> None:
    g.in_deg = {n: 0 for n in g.nodes}
    g.out_deg = {n: 0 for n in g.nodes}
    for u, v in g.edges:
        g.out_deg[u] += 1
        g.in_deg[v] += 1


def snapshot_from_parts(week: int, nodes, edges, mode: str = "cumulative") -> UserGraphSnapshot:
    """Assemble a snapshot from explicit node and edge collections."""
    g = UserGraphSnapshot(week=week, nodes=set(nodes), edges=set(), mode=mode)
    for u, v in edges:
        if u == v:
            continue
        g.nodes.add(u)
        g.nodes.add(v)
        g.edges.add((u, v))
    _recompute_degrees(g)
    return g


def tx_edges(tx: TxRecord, state: ClusterState):
    """Yield the (sender, receiver) user pairs one transaction induces."""
    if tx.is_coinbase:
        return
    try:
        sender = state.find_user(tx.inputs[0][0])
        change = change_output_index(tx)
        for i, (addr, _value) in enumerate(tx.outputs):
            if i == change:
                continue
            receiver = state.find_user(addr)
            if receiver != sender:
                yield sender, receiver
    except UnknownAddressError as e:
        raise ValidationError(f"state/stream mismatch at txid {tx.txid}: {e}") from None


def tx_users(tx: TxRecord, state: ClusterState):
    """All user ids a transaction touches (senders and every output)."""
    try:
        if tx.inputs:
            yield state.find_user(tx.inputs[0][0])
        for addr, _value in tx.outputs:
            yield state.find_user(addr)
    except UnknownAddressError as e:
        raise ValidationError(f"state/stream mismatch at txid {tx.txid}: {e}") from None


def build_snapshot(
    txs,
    state: ClusterState,
    week: int,
    mode: str = "cumulative",
) -> UserGraphSnapshot:
    """Build the user graph at ``week``.

    Cumulative mode aggregates transactions of every week <= week, weekly
    mode only the given week. Users are resolved against ``state`` as
    passed in, which for the default pipeline is the post-merge state of
    the whole analysis window.
    """
    if mode not in ("cumulative", "weekly"):
        raise ValidationError(f"unknown snapshot mode {mode!r}")
    g = UserGraphSnapshot(week=week, mode=mode)
    for tx in txs:
        if tx.week > week or (mode == "weekly" and tx.week != week):
            continue
        for uid in tx_users(tx, state):
            g.nodes.add(uid)
        for u, v in tx_edges(tx, state):
            g.edges.add((u, v))
    _recompute_degrees(g)
    return g


@dataclass
class PatternHistogram:
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def pattern_histogram(txs) -> PatternHistogram:
    """Bin transactions by (inputs, outputs) shape: 1-1, 1-2, 1-3, other."""
    counts = {key: 0 for key in PATTERN_KEYS}
    for tx in txs:
        n_in, n_out = tx.shape()
        key = f"{n_in}-{n_out}"
        if key not in counts:
            key = "other"
        counts[key] += 1
    return PatternHistogram(counts=counts)


def degree_filter_count(g: UserGraphSnapshot, k: int) -> int:
    """Number of nodes whose total degree exceeds k."""
    if k < 0:
        raise ValidationError(f"degree threshold must be >= 0, got {k}")
    return sum(1 for n in g.nodes if g.in_deg[n] + g.out_deg[n] > k)


def drop_isolated(g: UserGraphSnapshot) -> UserGraphSnapshot:
    """Copy of the snapshot without degree-0 nodes."""
    keep = {n for n in g.nodes if g.in_deg[n] + g.out_deg[n] > 0}
    return snapshot_from_parts(g.week, keep, g.edges, mode=g.mode)


def edge_rows(g: UserGraphSnapshot):
    """CSV rows ``week,src_user,dst_user`` in sorted order."""
    for u, v in sorted(g.edges):
        yield g.week, u, v


def degree_rows(g: UserGraphSnapshot):
    """CSV rows ``week,user,in_deg,out_deg``; covers isolated nodes too."""
    for n in sorted(g.nodes):
        yield g.week, n, g.in_deg[n], g.out_deg[n]
