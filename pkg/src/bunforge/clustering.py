"""Address-to-user clustering via union-find.

Two linking rules drive the grouping:

* multi-input: every address spent together in one transaction belongs to
  one user, so all inputs are unioned;
* change: in a transaction with at least one input and two or more
  outputs, the output with the strictly smallest value is treated as
  change returning to the sender and is unioned with the input cluster
  (ties broken by earliest output index). Remaining outputs register as
  their own, possibly pre-existing, users.

Groups merge automatically when a later transaction links them; a user id
is the smallest first-seen sequence number in its cluster, so provisional
users that get absorbed are never reported.
"""

from __future__ import annotations

from .errors import UnknownAddressError
from .ingest import TxRecord


def change_output_index(tx: TxRecord) -> int | None:
    """Index of the inferred change output, or None when not applicable.

    Applies only when the transaction has >= 1 input and >= 2 outputs;
    single-output transactions carry nothing that distinguishes change
    from payment, and coinbases have no sender.
    """
    if not tx.inputs or len(tx.outputs) < 2:
        return None
    best = 0
    best_value = tx.outputs[0][1]
    for i in range(1, len(tx.outputs)):
        v = tx.outputs[i][1]
        if v < best_value:
            best = i
            best_value = v
    return best


class ClusterState:
    """Incremental union-find over addresses with a merge log.

    Uses path halving and union by rank; the surviving canonical id after
    a union is the smaller of the two clusters' ids, so ids stay equal to
    the minimum first-seen sequence number of the cluster at all times.
    merge_log rows are (week, survivor id, absorbed id) and replaying them
    onto freshly registered singletons reproduces the partition.
    """

    __slots__ = ("_parent", "_rank", "_min_seq", "_index", "merge_log")

    def __init__(self):
        self._parent: list[int] = []
        self._rank: list[int] = []
        self._min_seq: list[int] = []
        self._index: dict[str, int] = {}
        self.merge_log: list[tuple[int, int, int]] = []

    def __len__(self) -> int:
        return len(self._parent)

    @property
    def addresses(self):
        """Addresses in first-seen order."""
        return self._index.keys()

    def register(self, address: str) -> int:
        idx = self._index.get(address)
        if idx is None:
            idx = len(self._parent)
            self._index[address] = idx
            self._parent.append(idx)
            self._rank.append(0)
            self._min_seq.append(idx)
        return idx

    def _find(self, i: int) -> int:
        parent = self._parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def _union(self, i: int, j: int, week: int, log: bool = True) -> None:
        ri, rj = self._find(i), self._find(j)
        if ri == rj:
            return
        a, b = self._min_seq[ri], self._min_seq[rj]
        if log:
            self.merge_log.append((week, min(a, b), max(a, b)))
        if self._rank[ri] < self._rank[rj]:
            ri, rj = rj, ri
        self._parent[rj] = ri
        if self._rank[ri] == self._rank[rj]:
            self._rank[ri] += 1
        self._min_seq[ri] = min(a, b)

    def apply_transaction(self, tx: TxRecord) -> None:
        """Absorb one transaction: register addresses, apply both rules."""
        in_idx = [self.register(a) for a, _ in tx.inputs]
        out_idx = [self.register(a) for a, _ in tx.outputs]
        if in_idx:
            first = in_idx[0]
            for k in in_idx[1:]:
                self._union(first, k, tx.week)
            change = change_output_index(tx)
            if change is not None:
                self._union(first, out_idx[change], tx.week)

    def user_of_index(self, idx: int) -> int:
        return self._min_seq[self._find(idx)]

    def find_user(self, address: str) -> int:
        """Canonical user id for a previously seen address."""
        idx = self._index.get(address)
        if idx is None:
            raise UnknownAddressError(f"address {address!r} never seen")
        return self._min_seq[self._find(idx)]

    def snapshot_partition(self) -> dict[int, list[str]]:
        """Complete disjoint cover: user id -> addresses, both sorted."""
        groups: dict[int, list[str]] = {}
        for address, idx in self._index.items():
            groups.setdefault(self.user_of_index(idx), []).append(address)
        return {uid: sorted(groups[uid]) for uid in sorted(groups)}

    # --- checkpointing -------------------------------------------------

    def checkpoint_rows(self):
        """(address, user id) in first-seen order; enough to restore."""
        for address, idx in self._index.items():
            yield address, self.user_of_index(idx)

    @classmethod
    def restore(cls, rows) -> "ClusterState":
        """Rebuild from checkpoint rows (first-seen order required).

        Re-applied unions are not logged; historical merges belong to the
        weeks that produced them.
        """
        state = cls()
        for address, uid in rows:
            idx = state.register(address)
            state._union(idx, uid, week=-1, log=False)
        return state


def replay(txs, state: ClusterState | None = None) -> ClusterState:
    state = state if state is not None else ClusterState()
    for tx in txs:
        state.apply_transaction(tx)
    return state


def partition_rows(state: ClusterState):
    """CSV rows ``user_id,address`` in export order."""
    for uid, addrs in state.snapshot_partition().items():
        for a in addrs:
            yield uid, a
