"""Weakly and strongly connected component analysis of user graphs.

Both traversals are iterative; snapshots can reach 10^7+ nodes and the
per-node bookkeeping has to live on the heap, not the call stack.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import EmptyGraphError
from .graph import UserGraphSnapshot


def _ordered(components: list[set[int]]) -> list[set[int]]:
    components.sort(key=lambda c: (-len(c), min(c)))
    return components


def wcc(g: UserGraphSnapshot) -> list[set[int]]:
    """Components of the underlying undirected graph, size-descending."""
    adj: dict[int, list[int]] = {n: [] for n in g.nodes}
    for u, v in g.edges:
        adj[u].append(v)
        adj[v].append(u)
    seen: set[int] = set()
    components: list[set[int]] = []
    for start in g.nodes:
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    comp.add(y)
                    queue.append(y)
        components.append(comp)
    return _ordered(components)


def scc(g: UserGraphSnapshot) -> list[set[int]]:
    """Maximal mutually reachable node sets, size-descending.

    Tarjan's algorithm with an explicit frame stack holding one adjacency
    iterator per open node.
    """
    adj: dict[int, list[int]] = {n: [] for n in g.nodes}
    for u, v in g.edges:
        adj[u].append(v)

    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[set[int]] = []
    counter = 0

    for root in g.nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        frames = [(root, iter(adj[root]))]
        while frames:
            v, it = frames[-1]
            descended = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    frames.append((w, iter(adj[w])))
                    descended = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if descended:
                continue
            frames.pop()
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                components.append(comp)
            if frames:
                u = frames[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
    return _ordered(components)


@dataclass
class ComponentStats:
    week: int
    n_wcc: int
    n_scc: int
    lwcc_size: int
    lscc_size: int
    second_wcc_size: int
    second_scc_size: int
    n_nodes: int

    def wcc_ratio(self) -> float | None:
        """Largest over second-largest; None when only one component."""
        return self.lwcc_size / self.second_wcc_size if self.second_wcc_size else None

    def scc_ratio(self) -> float | None:
        return self.lscc_size / self.second_scc_size if self.second_scc_size else None


def component_stats(g: UserGraphSnapshot) -> ComponentStats:
    if not g.nodes:
        raise EmptyGraphError("component stats undefined on an empty graph")
    wccs = wcc(g)
    sccs = scc(g)
    return ComponentStats(
        week=g.week,
        n_wcc=len(wccs),
        n_scc=len(sccs),
        lwcc_size=len(wccs[0]),
        lscc_size=len(sccs[0]),
        second_wcc_size=len(wccs[1]) if len(wccs) > 1 else 0,
        second_scc_size=len(sccs[1]) if len(sccs) > 1 else 0,
        n_nodes=len(g.nodes),
    )


def stats_row(s: ComponentStats) -> tuple:
    """CSV row ``week,n_wcc,n_scc,lwcc,lscc,wcc2,scc2,n_nodes``."""
    return (
        s.week,
        s.n_wcc,
        s.n_scc,
        s.lwcc_size,
        s.lscc_size,
        s.second_wcc_size,
        s.second_scc_size,
        s.n_nodes,
    )
