"""Command line interface.

Exit codes: 0 success, 2 validation error, 3 stage failure. A config file
(``key = value`` lines, keys named like the long flags) can seed any flag;
explicit flags win.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import BunforgeError, ValidationError
from .market import daily_vol_series, load_candles_csv, rolling_sweep, stats_rows, sweep_rows, vol_rows, yearly_stats
from .pipeline import DEFAULT_PATTERN_MIX, RunConfig, run, run_stages
from .plotting import FIGURE_KINDS, render_figure


def parse_weeks(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return int(a), int(b)
        w = int(text)
        return w, w
    except ValueError:
        raise ValidationError(f"bad week range {text!r}, expected A..B or N") from None


def parse_mix(text: str) -> dict[str, float]:
    mix: dict[str, float] = {}
    try:
        for part in text.split(","):
            key, value = part.split(":")
            mix[key.strip()] = float(value)
    except ValueError:
        raise ValidationError(f"bad mix {text!r}, expected e.g. 1-1:0.25,1-2:0.51,1-3:0.12,other:0.12") from None
    return mix


def load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {path}")
    for line_no, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: line {line_no}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip().strip('"')
    return values


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

# boolean flags and the option each value maps to
_BOOL_FLAGS = {
    "filtered-gini": ("--filtered-gini", None),
    "drop-isolated": ("--drop-isolated", None),
    "figures": ("--figures", "--no-figures"),
}


def config_to_argv(values: dict[str, str], known: set[str]) -> list[str]:
    argv: list[str] = []
    for key, value in values.items():
        if key in _BOOL_FLAGS:
            on, off = _BOOL_FLAGS[key]
            lowered = value.lower()
            if lowered in _TRUE and on in known:
                argv.append(on)
            elif lowered in _FALSE and off and off in known:
                argv.append(off)
            continue
        flag = "--" + key
        if flag in known:
            argv.extend([flag, value])
    return argv


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data-dir", default="bunforge-data", help="store directory (default: %(default)s)")
    p.add_argument("--weeks", default="0..0", help="week range A..B (default: %(default)s)")
    p.add_argument("--mode", choices=["cumulative", "weekly"], default="cumulative")
    p.add_argument("--config", default=None, help="key = value config file seeding these flags")
    p.add_argument("--genesis-height", type=int, default=0)
    p.add_argument("--blocks-per-week", type=int, default=1008)


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--source", choices=["file", "synthetic", "rpc"], default="synthetic")
    p.add_argument("--input", default=None, help="transaction JSONL (file source)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n-tx", type=int, default=10_000)
    p.add_argument("--mix", default=None, help="pattern mix, e.g. 1-1:0.25,1-2:0.51,1-3:0.12,other:0.12")
    p.add_argument("--txs-per-block", type=int, default=50)
    p.add_argument("--rpc-url", default=os.environ.get("BUNFORGE_RPC_URL"))
    p.add_argument("--rpc-auth", default=os.environ.get("BUNFORGE_RPC_AUTH"))
    p.add_argument("--from-height", type=int, default=None)
    p.add_argument("--to-height", type=int, default=None)


def _add_metrics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--resolution", choices=["final", "asof"], default="final")
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--pr-tol", type=float, default=1e-10)
    p.add_argument("--pr-max-iter", type=int, default=100)
    p.add_argument("--hits-k", type=int, default=20)
    p.add_argument("--top-c", type=int, default=10)
    p.add_argument("--filtered-gini", action="store_true")
    p.add_argument("--drop-isolated", action="store_true")
    p.add_argument("--figures", dest="figures", action="store_true", default=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bunforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="pull transactions into raw/ weekly JSONL")
    _add_common(p_ingest)
    _add_source(p_ingest)

    p_cluster = sub.add_parser("cluster", help="build address clusters from raw/")
    _add_common(p_cluster)

    p_graph = sub.add_parser("graph", help="build weekly user graphs from clusters")
    _add_common(p_graph)
    p_graph.add_argument("--resolution", choices=["final", "asof"], default="final")

    p_metrics = sub.add_parser("metrics", help="components, assortativity, centrality, inequality")
    _add_common(p_metrics)
    _add_metrics(p_metrics)

    p_market = sub.add_parser("market", help="daily volatility index and rolling event test")
    _add_common(p_market)
    p_market.add_argument("--candles", required=True, help="minute candle CSV")
    p_market.add_argument("--pair", default="BTC-USDT")
    p_market.add_argument("--window", type=int, default=7)
    p_market.add_argument("--alpha", type=float, default=0.05)
    p_market.add_argument("--min-coverage", type=float, default=0.9)

    p_run = sub.add_parser("run", help="all stages with an emitted manifest")
    _add_common(p_run)
    _add_source(p_run)
    _add_metrics(p_run)

    p_plot = sub.add_parser("plot", help="render one figure kind from a CSV")
    _add_common(p_plot)
    p_plot.add_argument("--kind", required=True, choices=sorted(FIGURE_KINDS))
    p_plot.add_argument("--input", required=True, help="metric CSV to plot")
    p_plot.add_argument("--output", required=True, help="destination SVG")

    return parser


def config_from_args(args) -> RunConfig:
    mix = parse_mix(args.mix) if getattr(args, "mix", None) else dict(DEFAULT_PATTERN_MIX)
    return RunConfig(
        data_dir=Path(args.data_dir),
        source=getattr(args, "source", "synthetic"),
        weeks=parse_weeks(args.weeks),
        mode=args.mode,
        resolution=getattr(args, "resolution", "final"),
        input_path=Path(args.input) if getattr(args, "input", None) else None,
        seed=getattr(args, "seed", 7),
        n_tx=getattr(args, "n_tx", 10_000),
        pattern_mix=mix,
        txs_per_block=getattr(args, "txs_per_block", 50),
        rpc_url=getattr(args, "rpc_url", None),
        rpc_auth=getattr(args, "rpc_auth", None),
        from_height=getattr(args, "from_height", None),
        to_height=getattr(args, "to_height", None),
        genesis_height=args.genesis_height,
        blocks_per_week=args.blocks_per_week,
        damping=getattr(args, "damping", 0.85),
        pr_tol=getattr(args, "pr_tol", 1e-10),
        pr_max_iter=getattr(args, "pr_max_iter", 100),
        hits_k=getattr(args, "hits_k", 20),
        top_c=getattr(args, "top_c", 10),
        filtered_gini=getattr(args, "filtered_gini", False),
        drop_isolated=getattr(args, "drop_isolated", False),
        figures=getattr(args, "figures", True),
    )


def _write_csv(path: Path, header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    lines = [header]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def cmd_market(args) -> int:
    series = load_candles_csv(args.candles, pair=args.pair)
    vols = daily_vol_series(series, min_coverage=args.min_coverage)
    out = Path(args.data_dir) / "market"
    _write_csv(out / "vol.csv", "date,vol1,n_samples", vol_rows(vols))
    sweep = rolling_sweep(vols, window=args.window, alpha=args.alpha)
    _write_csv(out / "sweep.csv", "event_date,p_value,h,n_pairs", sweep_rows(sweep))
    stats = yearly_stats(vols)
    _write_csv(out / "yearly_stats.csv", "year,max,mean,std,min", stats_rows(stats))
    render_figure(out / "vol.csv", "volatility", out / "volatility.svg")
    render_figure(out / "sweep.csv", "sweep", out / "sweep.svg")
    significant = sum(r.h for r in sweep.rows)
    print(f"{len(vols.days)} usable days ({len(vols.excluded)} excluded), "
          f"{len(sweep.rows)} event days tested, {significant} significant at alpha={args.alpha}")
    print(f"wrote {out}/vol.csv, sweep.csv, yearly_stats.csv, volatility.svg, sweep.svg")
    return 0


def _inject_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Turn --config file entries into flags ahead of the user's own."""
    if "--config" not in argv or not argv or argv[0].startswith("-"):
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    values = load_config_file(argv[idx + 1])
    subs = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]  # noqa: SLF001
    sub = subs[0].choices.get(argv[0]) if subs else None
    if sub is None:
        return argv
    known = {opt for action in sub._actions for opt in action.option_strings}  # noqa: SLF001
    return [argv[0]] + config_to_argv(values, known) + argv[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _inject_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "plot":
            render_figure(args.input, args.kind, args.output)
            print(f"wrote {args.output}")
            return 0
        if args.command == "market":
            return cmd_market(args)
        config = config_from_args(args)
        if args.command == "run":
            result = run(config)
            print(f"{len(result.executed)} stage tasks executed")
            print(f"manifest: {result.manifest_path}")
            return 0
        executed = run_stages(config, [args.command])
        print(f"{args.command}: {len(executed)} stage tasks executed into {config.data_dir}")
        return 0
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BunforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
