"""Stage orchestration over a flat-file store with run manifests.

Store layout under the data directory:

    raw/week-NNNN.jsonl          canonical transaction lines per week
    raw/truth.csv                address -> entity map (synthetic only)
    clusters/week-NNNN/          state.csv + merge_log.csv checkpoints
    clusters/partition.csv       final user_id,address export
    graphs/week-NNNN-edges.csv   week,src_user,dst_user
    graphs/week-NNNN-degrees.csv week,user,in_deg,out_deg
    metrics/week-NNNN/           per-week rows for the combined CSVs
    metrics/*.csv                combined components/metrics/topc exports
    metrics/figures/*.svg        rendered figures
    manifest.json

Every artifact is written to a temp area and renamed into place with a
sha256 sidecar, so each week's artifacts are complete or absent. A week
whose artifacts verify is skipped on re-runs; an artifact whose content
no longer matches its sidecar raises a checksum mismatch rather than
being silently rebuilt.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import __version__
from .clustering import ClusterState, partition_rows
from .components import component_stats, stats_row
from .errors import ChecksumMismatchError, BunforgeError, StageError, ValidationError
from .evaluate import score_partition
from .graph import (
    UserGraphSnapshot,
    build_snapshot,
    degree_filter_count,
    degree_rows,
    drop_isolated,
    edge_rows,
    snapshot_from_parts,
    tx_edges,
    tx_users,
)
from .ingest import (
    FileSource,
    SyntheticSource,
    WeekMapping,
    read_jsonl,
    serialize_record,
)
from .metrics import assortativity_quad, gini, hits, pagerank, top_c
from .plotting import render_figure

DEFAULT_PATTERN_MIX = {"1-1": 0.25, "1-2": 0.51, "1-3": 0.12, "other": 0.12}

COMPONENTS_HEADER = "week,n_wcc,n_scc,lwcc,lscc,wcc2,scc2,n_nodes"
METRICS_HEADER = (
    "week,r_out_out,r_out_in,r_in_out,r_in_in,pr_gini,hits_auth_gini,"
    "hits_hub_gini,filtered_nodes,total_nodes"
)
TOPC_HEADER = "week,kind,rank,user_id,score"
GINI_FILTERED_HEADER = "week,pr_gini_filtered,hits_auth_gini_filtered,hits_hub_gini_filtered"
EVAL_HEADER = "stream_seed,precision,recall,f1"

METRIC_FIGURES = (
    ("disconnected", "components.csv"),
    ("relative-size", "components.csv"),
    ("ratio", "components.csv"),
    ("newman", "metrics.csv"),
    ("growth", "metrics.csv"),
    ("pr-gini", "metrics.csv"),
    ("hits-gini", "metrics.csv"),
)


@dataclass
class RunConfig:
    data_dir: Path
    source: str = "synthetic"  # file | synthetic | rpc
    weeks: tuple[int, int] = (0, 0)
    mode: str = "cumulative"
    resolution: str = "final"  # final | asof
    input_path: Path | None = None
    seed: int = 7
    n_tx: int = 10_000
    pattern_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PATTERN_MIX))
    txs_per_block: int = 50
    rpc_url: str | None = None
    rpc_auth: str | None = None
    from_height: int | None = None
    to_height: int | None = None
    genesis_height: int = 0
    blocks_per_week: int = 1008
    damping: float = 0.85
    pr_tol: float = 1e-10
    pr_max_iter: int = 100
    hits_k: int = 20
    top_c: int = 10
    filtered_gini: bool = False
    drop_isolated: bool = False
    figures: bool = True

    def validate(self) -> None:
        if self.source not in ("file", "synthetic", "rpc"):
            raise ValidationError(f"unknown source {self.source!r}")
        a, b = self.weeks
        if a < 0 or b < a:
            raise ValidationError(f"bad week range {a}..{b}")
        if self.mode not in ("cumulative", "weekly"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.resolution not in ("final", "asof"):
            raise ValidationError(f"unknown resolution {self.resolution!r}")
        if self.source == "file":
            if not self.input_path:
                raise ValidationError("file source needs an input path")
            if not Path(self.input_path).exists():
                raise ValidationError(f"input file not found: {self.input_path}")
        if self.source == "rpc":
            if not self.rpc_url:
                raise ValidationError("rpc source needs --rpc-url")
            if self.from_height is None or self.to_height is None:
                raise ValidationError("rpc source needs --from-height and --to-height")

    def week_map(self) -> WeekMapping:
        return WeekMapping(genesis_height=self.genesis_height, blocks_per_week=self.blocks_per_week)

    def source_descriptor(self) -> str:
        if self.source == "synthetic":
            mix = ",".join(f"{k}:{self.pattern_mix[k]!r}" for k in sorted(self.pattern_mix))
            return f"synthetic:seed={self.seed},n_tx={self.n_tx},txs_per_block={self.txs_per_block},mix[{mix}]"
        if self.source == "file":
            return f"file:sha256={_sha256_path(self.input_path)}"
        return f"rpc:{self.rpc_url},heights={self.from_height}..{self.to_height}"

    def fingerprint(self) -> str:
        payload = asdict(self)
        payload.pop("data_dir")
        payload["input_path"] = str(payload["input_path"]) if payload["input_path"] else None
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunResult:
    manifest: dict
    manifest_path: Path
    executed: list[str]


# --- storage helpers -----------------------------------------------------


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_path(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Store:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.tmp = self.root / "tmp"

    def prepare(self) -> None:
        for sub in ("raw", "clusters", "graphs", "metrics", "metrics/figures"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        if self.tmp.exists():
            shutil.rmtree(self.tmp)
        self.tmp.mkdir()

    def cleanup(self) -> None:
        if self.tmp.exists():
            shutil.rmtree(self.tmp, ignore_errors=True)

    def write_text(self, relpath: str, text: str) -> None:
        """Atomic write with sha256 sidecar."""
        final = self.root / relpath
        final.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        tmp = self.tmp / relpath.replace("/", "__")
        tmp.write_bytes(data)
        tmp.replace(final)
        side = self.tmp / (relpath.replace("/", "__") + ".sha256")
        side.write_text(_sha256_bytes(data) + "\n")
        side.replace(Path(str(final) + ".sha256"))

    def write_csv(self, relpath: str, header: str, rows) -> None:
        lines = [header]
        lines.extend(",".join(str(c) for c in row) for row in rows)
        self.write_text(relpath, "\n".join(lines) + "\n")

    def write_dir(self, relpath: str, files: dict[str, str]) -> None:
        """Atomically create a directory of files with sidecars inside."""
        tmp = self.tmp / relpath.replace("/", "__")
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        for name, text in files.items():
            data = text.encode("utf-8")
            (tmp / name).write_bytes(data)
            (tmp / (name + ".sha256")).write_text(_sha256_bytes(data) + "\n")
        final = self.root / relpath
        if final.exists():
            shutil.rmtree(final)
        tmp.replace(final)

    def status(self, relpath: str, stage: str, week: int | None) -> str:
        """'complete', 'absent', or raise on checksum mismatch."""
        final = self.root / relpath
        side = Path(str(final) + ".sha256")
        if not final.exists() and not side.exists():
            return "absent"
        if not final.exists() or not side.exists():
            return "absent"
        if _sha256_path(final) != side.read_text().strip():
            raise ChecksumMismatchError(stage, week, relpath)
        return "complete"

    def dir_status(self, relpath: str, names: list[str], stage: str, week: int | None) -> str:
        base = self.root / relpath
        if not base.exists():
            return "absent"
        for name in names:
            f = base / name
            side = base / (name + ".sha256")
            if not f.exists() or not side.exists():
                return "absent"
            if _sha256_path(f) != side.read_text().strip():
                raise ChecksumMismatchError(stage, week, f"{relpath}/{name}")
        return "complete"


def _week_name(week: int) -> str:
    return f"week-{week:04d}"


class _stage_week:
    """Wrap unexpected per-week failures into StageError with context."""

    def __init__(self, stage: str, week: int | None):
        self.stage = stage
        self.week = week

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, BunforgeError):
            raise StageError(self.stage, self.week, str(exc)) from exc
        return False


def _csv_text(header: str, rows) -> str:
    lines = [header]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    return "\n".join(lines) + "\n"


# --- sources -------------------------------------------------------------


def open_source(config: RunConfig):
    week_map = config.week_map()
    if config.source == "file":
        return FileSource(config.input_path, week_map=week_map)
    if config.source == "synthetic":
        return SyntheticSource(
            config.seed,
            config.n_tx,
            config.pattern_mix,
            txs_per_block=config.txs_per_block,
            week_map=week_map,
        )
    from .rpc import RpcClient, RpcSource

    client = RpcClient(config.rpc_url, auth=config.rpc_auth)
    return RpcSource(client, config.from_height, config.to_height, week_map=week_map)


# --- stages --------------------------------------------------------------


def stage_ingest(config: RunConfig, store: Store, executed: list[str]) -> None:
    a, b = config.weeks
    weeks = list(range(a, b + 1))
    missing = [w for w in weeks if store.status(f"raw/{_week_name(w)}.jsonl", "ingest", w) == "absent"]
    truth_wanted = config.source == "synthetic"
    truth_path = "raw/truth.csv"
    need_truth = truth_wanted and store.status(truth_path, "ingest", None) == "absent"
    if not missing and not need_truth:
        return
    source = open_source(config)
    lines: dict[int, list[str]] = {w: [] for w in weeks}
    kept_addresses: set[str] = set()
    for tx in source:
        if tx.week < a:
            continue
        if tx.week > b:
            break
        lines[tx.week].append(serialize_record(tx))
        if truth_wanted:
            for addr, _v in tx.inputs:
                kept_addresses.add(addr)
            for addr, _v in tx.outputs:
                kept_addresses.add(addr)
    for w in missing:
        store.write_text(f"raw/{_week_name(w)}.jsonl", "".join(line + "\n" for line in lines[w]))
        executed.append(f"ingest:{_week_name(w)}")
    if need_truth:
        truth = source.truth
        rows = sorted((addr, truth[addr]) for addr in kept_addresses)
        store.write_csv(truth_path, "address,entity", rows)
        executed.append("ingest:truth")


_CLUSTER_FILES = ["state.csv", "merge_log.csv"]


def _load_state(store: Store, week: int) -> ClusterState:
    rows = []
    path = store.root / "clusters" / _week_name(week) / "state.csv"
    with open(path, encoding="utf-8") as f:
        next(f)  # header
        for line in f:
            addr, uid = line.rstrip("\n").rsplit(",", 1)
            rows.append((addr, int(uid)))
    return ClusterState.restore(rows)


def stage_cluster(config: RunConfig, store: Store, executed: list[str]) -> None:
    a, b = config.weeks
    done = a - 1
    for w in range(a, b + 1):
        if store.dir_status(f"clusters/{_week_name(w)}", _CLUSTER_FILES, "cluster", w) == "complete":
            done = w
        else:
            break
    state = _load_state(store, done) if done >= a else ClusterState()
    for w in range(done + 1, b + 1):
        with _stage_week("cluster", w):
            txs = read_jsonl(store.root / "raw" / f"{_week_name(w)}.jsonl", week_map=config.week_map())
            log_start = len(state.merge_log)
            for tx in txs:
                state.apply_transaction(tx)
            merges = state.merge_log[log_start:]
            store.write_dir(
                f"clusters/{_week_name(w)}",
                {
                    "state.csv": _csv_text("address,user_id", state.checkpoint_rows()),
                    "merge_log.csv": _csv_text("week,survivor,absorbed", merges),
                },
            )
            executed.append(f"cluster:{_week_name(w)}")
    if store.status("clusters/partition.csv", "cluster", None) == "absent":
        final = _load_state(store, b)
        store.write_csv("clusters/partition.csv", "user_id,address", partition_rows(final))
        executed.append("cluster:partition")


def _graph_files(week: int) -> tuple[str, str]:
    return (f"graphs/{_week_name(week)}-edges.csv", f"graphs/{_week_name(week)}-degrees.csv")


def load_snapshot(store: Store, week: int, mode: str) -> UserGraphSnapshot:
    edges_rel, degrees_rel = _graph_files(week)
    nodes = []
    with open(store.root / degrees_rel, encoding="utf-8") as f:
        next(f)
        for line in f:
            _w, user, _i, _o = line.rstrip("\n").split(",")
            nodes.append(int(user))
    edges = []
    with open(store.root / edges_rel, encoding="utf-8") as f:
        next(f)
        for line in f:
            _w, u, v = line.rstrip("\n").split(",")
            edges.append((int(u), int(v)))
    return snapshot_from_parts(week, nodes, edges, mode=mode)


def _graph_complete(store: Store, week: int) -> bool:
    edges_rel, degrees_rel = _graph_files(week)
    return (
        store.status(edges_rel, "graph", week) == "complete"
        and store.status(degrees_rel, "graph", week) == "complete"
    )


def stage_graph(config: RunConfig, store: Store, executed: list[str]) -> None:
    a, b = config.weeks
    week_map = config.week_map()

    def write_week(g: UserGraphSnapshot) -> None:
        edges_rel, degrees_rel = _graph_files(g.week)
        store.write_csv(edges_rel, "week,src_user,dst_user", edge_rows(g))
        store.write_csv(degrees_rel, "week,user,in_deg,out_deg", degree_rows(g))
        executed.append(f"graph:{_week_name(g.week)}")

    if config.resolution == "asof" or config.mode == "weekly":
        state_cache: ClusterState | None = None
        for w in range(a, b + 1):
            if _graph_complete(store, w):
                continue
            with _stage_week("graph", w):
                if config.resolution == "asof":
                    state = _load_state(store, w)
                else:
                    state_cache = state_cache or _load_state(store, b)
                    state = state_cache
                lo = a if config.mode == "cumulative" else w
                txs = []
                for wk in range(lo, w + 1):
                    txs.extend(read_jsonl(store.root / "raw" / f"{_week_name(wk)}.jsonl", week_map=week_map))
                write_week(build_snapshot(txs, state, week=w, mode=config.mode))
        return

    # cumulative + final resolution: single pass with running accumulation
    start = a
    for w in range(a, b + 1):
        if _graph_complete(store, w):
            start = w + 1
        else:
            break
    if start > b:
        return
    state = _load_state(store, b)
    if start > a:
        prev = load_snapshot(store, start - 1, "cumulative")
        nodes, edges = prev.nodes, prev.edges
    else:
        nodes, edges = set(), set()
    for w in range(start, b + 1):
        with _stage_week("graph", w):
            for tx in read_jsonl(store.root / "raw" / f"{_week_name(w)}.jsonl", week_map=week_map):
                for uid in tx_users(tx, state):
                    nodes.add(uid)
                for u, v in tx_edges(tx, state):
                    edges.add((u, v))
            write_week(snapshot_from_parts(w, nodes, edges, mode="cumulative"))


_METRIC_FILES = ["components.csv", "metrics.csv", "topc.csv"]


def _metric_week_files(config: RunConfig) -> list[str]:
    files = list(_METRIC_FILES)
    if config.filtered_gini:
        files.append("gini_filtered.csv")
    return files


def compute_metric_rows(g: UserGraphSnapshot, config: RunConfig):
    """All per-week metric rows for one snapshot."""
    if config.drop_isolated:
        g = drop_isolated(g)
    if not g.nodes:
        comp = (g.week, 0, 0, 0, 0, 0, 0, 0)
        metric = (g.week, "", "", "", "", "", "", "", 0, 0)
        return comp, metric, [], None
    comp = stats_row(component_stats(g))
    try:
        quad_cells = ["" if v is None else repr(v) for v in assortativity_quad(g).as_tuple()]
    except ValidationError:
        quad_cells = ["", "", "", ""]
    pr = pagerank(g, d=config.damping, tol=config.pr_tol, max_iter=config.pr_max_iter)
    auth, hub = hits(g, k=config.hits_k)

    def gini_cell(values) -> str:
        try:
            return repr(gini(values))
        except ValidationError:
            return ""

    metric = (
        g.week,
        *quad_cells,
        gini_cell(list(pr.values.values())),
        gini_cell(list(auth.values.values())),
        gini_cell(list(hub.values.values())),
        degree_filter_count(g, 2),
        g.n_nodes,
    )
    topc = []
    for vec in (pr, auth, hub):
        for rank, uid, score in top_c(vec, c=config.top_c):
            topc.append((g.week, vec.kind, rank, uid, repr(score)))
    filtered_row = None
    if config.filtered_gini:
        keep = [n for n in g.nodes if g.in_deg[n] + g.out_deg[n] > 2]
        if keep:
            filtered_row = (
                g.week,
                gini_cell([pr.values[n] for n in keep]),
                gini_cell([auth.values[n] for n in keep]),
                gini_cell([hub.values[n] for n in keep]),
            )
        else:
            filtered_row = (g.week, "", "", "")
    return comp, metric, topc, filtered_row


def stage_metrics(config: RunConfig, store: Store, executed: list[str]) -> None:
    a, b = config.weeks
    week_files = _metric_week_files(config)
    any_built = False
    for w in range(a, b + 1):
        rel = f"metrics/{_week_name(w)}"
        if store.dir_status(rel, week_files, "metrics", w) == "complete":
            continue
        with _stage_week("metrics", w):
            g = load_snapshot(store, w, config.mode)
            comp, metric, topc, filtered_row = compute_metric_rows(g, config)
            files = {
                "components.csv": _csv_text(COMPONENTS_HEADER, [comp]),
                "metrics.csv": _csv_text(METRICS_HEADER, [metric]),
                "topc.csv": _csv_text(TOPC_HEADER, topc),
            }
            if config.filtered_gini:
                files["gini_filtered.csv"] = _csv_text(GINI_FILTERED_HEADER, [filtered_row])
            store.write_dir(rel, files)
            executed.append(f"metrics:{_week_name(w)}")
            any_built = True

    combined = [
        ("metrics/components.csv", COMPONENTS_HEADER, "components.csv"),
        ("metrics/metrics.csv", METRICS_HEADER, "metrics.csv"),
        ("metrics/topc.csv", TOPC_HEADER, "topc.csv"),
    ]
    if config.filtered_gini:
        combined.append(("metrics/gini_filtered.csv", GINI_FILTERED_HEADER, "gini_filtered.csv"))
    need_combined = any_built or any(
        store.status(rel, "metrics", None) == "absent" for rel, _h, _n in combined
    )
    if need_combined:
        for rel, header, name in combined:
            rows = []
            for w in range(a, b + 1):
                path = store.root / "metrics" / _week_name(w) / name
                with open(path, encoding="utf-8") as f:
                    next(f)
                    rows.extend(line.rstrip("\n") for line in f if line.strip())
            store.write_text(rel, "\n".join([header] + rows) + "\n")
        executed.append("metrics:combined")

    truth_path = store.root / "raw" / "truth.csv"
    eval_rel = "metrics/clustering_eval.csv"
    if truth_path.exists() and (any_built or store.status(eval_rel, "metrics", None) == "absent"):
        truth: dict[int, set[str]] = {}
        with open(truth_path, encoding="utf-8") as f:
            next(f)
            for line in f:
                addr, ent = line.rstrip("\n").rsplit(",", 1)
                truth.setdefault(int(ent), set()).add(addr)
        state = _load_state(store, b)
        predicted = {uid: set(addrs) for uid, addrs in state.snapshot_partition().items()}
        score = score_partition(predicted, truth)
        store.write_csv(
            eval_rel, EVAL_HEADER,
            [(config.seed, repr(score.precision), repr(score.recall), repr(score.f1))],
        )
        executed.append("metrics:eval")

    if config.figures:
        for kind, csv_name in METRIC_FIGURES:
            rel = f"metrics/figures/{kind}.svg"
            if not need_combined and store.status(rel, "metrics", None) == "complete":
                continue
            svg_tmp = store.tmp / f"fig-{kind}.svg"
            render_figure(store.root / "metrics" / csv_name, kind, svg_tmp)
            store.write_text(rel, svg_tmp.read_text(encoding="utf-8"))
            executed.append(f"metrics:figure:{kind}")


STAGES = (
    ("ingest", stage_ingest),
    ("cluster", stage_cluster),
    ("graph", stage_graph),
    ("metrics", stage_metrics),
)


def _guard_config_compatibility(config: RunConfig, store: Store) -> None:
    """Refuse to mix artifacts produced under a different configuration.

    Completed-week skipping is only sound when every artifact in the store
    was built from the same config (final-state user resolution in
    particular depends on the full requested window).
    """
    manifest_path = store.root / "manifest.json"
    if not manifest_path.exists():
        return
    try:
        recorded = json.loads(manifest_path.read_text(encoding="utf-8")).get("config_hash")
    except (OSError, ValueError):
        return
    if recorded and recorded != config.fingerprint():
        raise ValidationError(
            f"data dir {store.root} was produced by a different configuration "
            f"(config hash {recorded[:12]}.. != {config.fingerprint()[:12]}..); "
            "use a fresh --data-dir"
        )


def run_stages(config: RunConfig, names) -> list[str]:
    """Execute a subset of stages against the store; returns work done."""
    config.validate()
    wanted = dict(STAGES)
    store = Store(Path(config.data_dir))
    _guard_config_compatibility(config, store)
    store.prepare()
    executed: list[str] = []
    try:
        for name in names:
            try:
                wanted[name](config, store, executed)
            except BunforgeError:
                raise
            except Exception as e:  # noqa: BLE001 - surface as stage failure
                raise StageError(name, None, str(e)) from e
    finally:
        store.cleanup()
    return executed


def run(config: RunConfig) -> RunResult:
    """Execute all stages for the requested weeks, skipping complete ones."""
    executed = run_stages(config, [name for name, _fn in STAGES])
    store = Store(Path(config.data_dir))

    manifest = {
        "tool": "bunforge",
        "version": __version__,
        "config_hash": config.fingerprint(),
        "source": config.source_descriptor(),
        "weeks": list(config.weeks),
        "artifacts": _collect_artifacts(store),
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    manifest_path = store.root / "manifest.json"
    tmp = store.root / "manifest.json.tmp"
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(manifest_path)
    return RunResult(manifest=manifest, manifest_path=manifest_path, executed=executed)


def _collect_artifacts(store: Store) -> dict[str, str]:
    artifacts: dict[str, str] = {}
    for side in sorted(store.root.rglob("*.sha256")):
        rel = side.relative_to(store.root).as_posix()[: -len(".sha256")]
        artifacts[rel] = side.read_text().strip()
    return artifacts
