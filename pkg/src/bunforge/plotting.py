"""Deterministic SVG figures rendered from the metric CSVs.

Output is byte-stable for fixed input: the SVG hash salt is pinned, text
is emitted as text elements rather than font paths, and no creation date
is written.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "bunforge"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt

from .errors import ValidationError


def _read_csv(path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        rows = list(reader)
    return header, rows


def _column(rows, name, cast=float):
    out = []
    for row in rows:
        cell = row[name]
        out.append(cast(cell) if cell not in ("", None) else None)
    return out


def _require(header: list[str], rows: list[dict], needed: tuple[str, ...], kind: str) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValidationError(f"schema mismatch for kind {kind!r}: missing columns {missing}")
    if not rows:
        raise ValidationError(f"schema mismatch for kind {kind!r}: no data rows")


def _line(ax, x, ys, labels):
    for y, label in zip(ys, labels):
        xs = [a for a, b in zip(x, y) if b is not None]
        vals = [b for b in y if b is not None]
        ax.plot(xs, vals, label=label, linewidth=1.2)
    ax.legend(fontsize=8)


def _plot_disconnected(ax, header, rows):
    _require(header, rows, ("week", "n_wcc", "n_scc"), "disconnected")
    week = _column(rows, "week")
    _line(ax, week, [_column(rows, "n_wcc"), _column(rows, "n_scc")], ["WCC count", "SCC count"])
    ax.set_yscale("log")
    ax.set_xlabel("week")
    ax.set_ylabel("components")


def _plot_relative_size(ax, header, rows):
    _require(header, rows, ("week", "lwcc", "lscc", "n_nodes"), "relative-size")
    week = _column(rows, "week")
    n = _column(rows, "n_nodes")
    lw = [a / b if b else None for a, b in zip(_column(rows, "lwcc"), n)]
    ls = [a / b if b else None for a, b in zip(_column(rows, "lscc"), n)]
    _line(ax, week, [lw, ls], ["LWCC / N", "LSCC / N"])
    ax.set_ylim(0, 1)
    ax.set_xlabel("week")
    ax.set_ylabel("relative size")


def _plot_ratio(ax, header, rows):
    _require(header, rows, ("week", "lwcc", "lscc", "wcc2", "scc2"), "ratio")
    week = _column(rows, "week")
    rw = [a / b if b else None for a, b in zip(_column(rows, "lwcc"), _column(rows, "wcc2"))]
    rs = [a / b if b else None for a, b in zip(_column(rows, "lscc"), _column(rows, "scc2"))]
    _line(ax, week, [rw, rs], ["LWCC / 2nd WCC", "LSCC / 2nd SCC"])
    ax.set_yscale("log")
    ax.set_xlabel("week")
    ax.set_ylabel("size ratio")


_NEWMAN_COLS = ("r_out_out", "r_out_in", "r_in_out", "r_in_in")


def _plot_newman(ax, header, rows):
    _require(header, rows, ("week",) + _NEWMAN_COLS, "newman")
    week = _column(rows, "week")
    _line(ax, week, [_column(rows, c) for c in _NEWMAN_COLS], list(_NEWMAN_COLS))
    ax.axhline(0.0, color="gray", linewidth=0.6)
    ax.set_xlabel("week")
    ax.set_ylabel("assortativity")


def _plot_growth(ax, header, rows):
    _require(header, rows, ("week", "filtered_nodes", "total_nodes"), "growth")
    week = _column(rows, "week")
    _line(ax, week, [_column(rows, "total_nodes"), _column(rows, "filtered_nodes")],
          ["total nodes", "nodes with degree > 2"])
    ax.set_xlabel("week")
    ax.set_ylabel("nodes")


def _plot_pr_gini(ax, header, rows):
    _require(header, rows, ("week", "pr_gini"), "pr-gini")
    _line(ax, _column(rows, "week"), [_column(rows, "pr_gini")], ["PageRank Gini"])
    ax.set_ylim(0, 1)
    ax.set_xlabel("week")
    ax.set_ylabel("Gini")


def _plot_hits_gini(ax, header, rows):
    _require(header, rows, ("week", "hits_auth_gini", "hits_hub_gini"), "hits-gini")
    _line(ax, _column(rows, "week"),
          [_column(rows, "hits_auth_gini"), _column(rows, "hits_hub_gini")],
          ["authority Gini", "hub Gini"])
    ax.set_ylim(0, 1)
    ax.set_xlabel("week")
    ax.set_ylabel("Gini")


def _plot_volatility(ax, header, rows):
    _require(header, rows, ("date", "vol1"), "volatility")
    x = list(range(len(rows)))
    _line(ax, x, [_column(rows, "vol1")], ["daily volatility index"])
    ax.set_xlabel("day")
    ax.set_ylabel("VOL1")


def _plot_sweep(ax, header, rows):
    _require(header, rows, ("event_date", "p_value"), "sweep")
    x = list(range(len(rows)))
    _line(ax, x, [_column(rows, "p_value")], ["p-value"])
    ax.axhline(0.05, color="red", linewidth=0.6, linestyle="--")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("event day")
    ax.set_ylabel("p")


FIGURE_KINDS = {
    "disconnected": _plot_disconnected,
    "relative-size": _plot_relative_size,
    "ratio": _plot_ratio,
    "newman": _plot_newman,
    "growth": _plot_growth,
    "pr-gini": _plot_pr_gini,
    "hits-gini": _plot_hits_gini,
    "volatility": _plot_volatility,
    "sweep": _plot_sweep,
}


def render_figure(csv_path, kind: str, out_path) -> None:
    """Render one figure kind from its CSV into a self-contained SVG."""
    painter = FIGURE_KINDS.get(kind)
    if painter is None:
        raise ValidationError(f"unknown figure kind {kind!r} (choose from {sorted(FIGURE_KINDS)})")
    header, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    try:
        painter(ax, header, rows)
        ax.set_title(kind)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
