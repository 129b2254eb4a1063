"""Directed assortativity, PageRank, HITS, and Gini inequality.

PageRank follows PR(i) = (1-d)/N + d * sum_{j in M_i} PR(j)/L(j) under
power iteration, with the mass of dangling nodes (L(j) = 0) redistributed
uniformly over all N nodes so the vector stays a probability distribution
after every single iteration.

HITS alternates the authority update (sum of in-neighbour hub weights) and
the hub update (sum of out-neighbour authority weights), renormalizing to
unit L2 norm after each update, for a fixed number of rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGraphError, ValidationError
from .graph import UserGraphSnapshot


@dataclass
class CentralityVector:
    week: int
    kind: str
    values: dict[int, float]
    iterations: int = 0
    converged: bool = True
    degenerate: bool = False


@dataclass
class AssortativityQuad:
    r_out_out: float | None
    r_out_in: float | None
    r_in_out: float | None
    r_in_in: float | None

    def as_tuple(self):
        return (self.r_out_out, self.r_out_in, self.r_in_out, self.r_in_in)


def _edge_arrays(g: UserGraphSnapshot):
    """Sorted node list, id->index map, and edge index arrays."""
    nodes = sorted(g.nodes)
    pos = {n: i for i, n in enumerate(nodes)}
    if g.edges:
        edges = sorted(g.edges)
        src = np.fromiter((pos[u] for u, _ in edges), dtype=np.int64, count=len(edges))
        dst = np.fromiter((pos[v] for _, v in edges), dtype=np.int64, count=len(edges))
    else:
        src = np.empty(0, dtype=np.int64)
        dst = np.empty(0, dtype=np.int64)
    return nodes, src, dst


def assortativity(g: UserGraphSnapshot, src_kind: str, dst_kind: str) -> float | None:
    """Pearson correlation over directed edges between endpoint degrees.

    src_kind/dst_kind select in- or out-degree of the source and target.
    Returns None when either marginal has zero variance.
    """
    if src_kind not in ("in", "out") or dst_kind not in ("in", "out"):
        raise ValidationError(f"degree kinds must be 'in' or 'out', got {src_kind!r}, {dst_kind!r}")
    if len(g.edges) < 2:
        raise ValidationError(f"assortativity needs >= 2 edges, got {len(g.edges)}")
    nodes, src, dst = _edge_arrays(g)
    in_deg = np.array([g.in_deg[n] for n in nodes], dtype=np.float64)
    out_deg = np.array([g.out_deg[n] for n in nodes], dtype=np.float64)
    x = (out_deg if src_kind == "out" else in_deg)[src]
    y = (out_deg if dst_kind == "out" else in_deg)[dst]
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0 or sy == 0.0:
        return None
    r = float((xc * yc).sum()) / (sx * sy)
    return min(1.0, max(-1.0, r))


def assortativity_quad(g: UserGraphSnapshot) -> AssortativityQuad:
    return AssortativityQuad(
        r_out_out=assortativity(g, "out", "out"),
        r_out_in=assortativity(g, "out", "in"),
        r_in_out=assortativity(g, "in", "out"),
        r_in_in=assortativity(g, "in", "in"),
    )


def _pagerank_step(pr, src, dst, out_deg, d):
    """One power iteration step; keeps sum(pr) == 1."""
    n = pr.shape[0]
    share = np.divide(pr, out_deg, out=np.zeros_like(pr), where=out_deg > 0)
    incoming = np.bincount(dst, weights=share[src], minlength=n)
    dangling = pr[out_deg == 0].sum()
    return (1.0 - d) / n + d * (incoming + dangling / n)


def pagerank(
    g: UserGraphSnapshot,
    d: float = 0.85,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> CentralityVector:
    """Power iteration on the damped random-surfer recurrence.

    Stops when the L1 change drops below ``tol`` or after ``max_iter``
    rounds; the vector reports which happened via ``converged``.
    """
    if not g.nodes:
        raise EmptyGraphError("pagerank undefined on an empty graph")
    if not 0.0 < d < 1.0:
        raise ValidationError(f"damping factor must be in (0, 1), got {d}")
    nodes, src, dst = _edge_arrays(g)
    n = len(nodes)
    out_deg = np.array([g.out_deg[v] for v in nodes], dtype=np.float64)
    pr = np.full(n, 1.0 / n)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = _pagerank_step(pr, src, dst, out_deg, d)
        delta = float(np.abs(new - pr).sum())
        pr = new
        if delta < tol:
            converged = True
            break
    return CentralityVector(
        week=g.week,
        kind="pagerank",
        values=dict(zip(nodes, pr.tolist())),
        iterations=iterations,
        converged=converged,
    )


def hits(
    g: UserGraphSnapshot, k: int = 20, tol: float | None = None
) -> tuple[CentralityVector, CentralityVector]:
    """Alternating authority/hub updates for exactly k rounds.

    Both vectors start as all-ones and are L2-normalized after each
    update. By default all k rounds run with no convergence test; passing
    ``tol`` enables early stop once neither vector moves more than tol in
    max norm. On a graph with no edges the updates zero out; that case is
    flagged degenerate and uniform unit vectors are returned.
    """
    if not g.nodes:
        raise EmptyGraphError("hits undefined on an empty graph")
    if k < 1:
        raise ValidationError(f"iteration count must be >= 1, got {k}")
    nodes, src, dst = _edge_arrays(g)
    n = len(nodes)
    x = np.ones(n)
    y = np.ones(n)
    degenerate = False
    rounds = 0
    for rounds in range(1, k + 1):
        x_prev, y_prev = x, y
        x = np.bincount(dst, weights=y[src], minlength=n)
        nx = float(np.sqrt((x * x).sum()))
        if nx == 0.0:
            degenerate = True
            break
        x /= nx
        y = np.bincount(src, weights=x[dst], minlength=n)
        ny = float(np.sqrt((y * y).sum()))
        if ny == 0.0:
            degenerate = True
            break
        y /= ny
        if tol is not None and rounds > 1:
            if np.abs(x - x_prev).max() < tol and np.abs(y - y_prev).max() < tol:
                break
    if degenerate:
        x = np.full(n, 1.0 / np.sqrt(n))
        y = np.full(n, 1.0 / np.sqrt(n))
    auth = CentralityVector(
        week=g.week, kind="hits_authority", values=dict(zip(nodes, x.tolist())),
        iterations=rounds, degenerate=degenerate,
    )
    hub = CentralityVector(
        week=g.week, kind="hits_hub", values=dict(zip(nodes, y.tolist())),
        iterations=rounds, degenerate=degenerate,
    )
    return auth, hub


def gini(values) -> float:
    """Normalized mean absolute pairwise difference, in [0, 1).

    Computed via the sorted identity
    sum_i (2i - n - 1) * x_(i) / (n^2 * mean), which equals the double
    sum over |x_i - x_j| / (2 n^2 mean).
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("gini needs a non-empty 1-d collection")
    if np.any(arr < 0):
        raise ValidationError("gini undefined for negative values")
    mean = float(arr.mean())
    if mean == 0.0:
        raise ValidationError("gini undefined when all values are zero")
    s = np.sort(arr)
    if s[0] == s[-1]:
        return 0.0
    n = arr.size
    coeff = 2.0 * np.arange(1, n + 1) - n - 1
    return float((coeff * s).sum() / (n * n * mean))


def top_c(vector: CentralityVector, c: int = 10) -> list[tuple[int, int, float]]:
    """Top-c report rows (rank, user id, score); ties broken by user id."""
    if c < 1:
        raise ValidationError(f"top_c needs c >= 1, got {c}")
    ranked = sorted(vector.values.items(), key=lambda kv: (-kv[1], kv[0]))[:c]
    return [(rank, uid, score) for rank, (uid, score) in enumerate(ranked, start=1)]
