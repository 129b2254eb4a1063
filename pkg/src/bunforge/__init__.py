"""bunforge: Bitcoin user-network reconstruction and mesoscopic metrics."""

__version__ = "0.1.0"

from .clustering import ClusterState, change_output_index, replay
from .components import ComponentStats, component_stats, scc, wcc
from .errors import BunforgeError, StageError, ValidationError
from .evaluate import ClusteringScore, score_partition
from .graph import (
    PatternHistogram,
    UserGraphSnapshot,
    build_snapshot,
    degree_filter_count,
    pattern_histogram,
)
from .ingest import (
    TxRecord,
    WeekMapping,
    FileSource,
    SyntheticSource,
    generate_synthetic,
    parse_record,
    serialize_record,
)
from .market import (
    PriceSeries,
    SweepResult,
    VolSeries,
    daily_vol_series,
    load_candles_csv,
    rolling_sweep,
    vol1,
    wilcoxon_signed_rank,
    yearly_stats,
)
from .metrics import (
    AssortativityQuad,
    CentralityVector,
    assortativity,
    assortativity_quad,
    gini,
    hits,
    pagerank,
    top_c,
)
from .pipeline import RunConfig, RunResult, run

__all__ = [
    "__version__",
    "AssortativityQuad",
    "BunforgeError",
    "CentralityVector",
    "ClusterState",
    "ClusteringScore",
    "ComponentStats",
    "FileSource",
    "PatternHistogram",
    "PriceSeries",
    "RunConfig",
    "RunResult",
    "StageError",
    "SweepResult",
    "SyntheticSource",
    "TxRecord",
    "UserGraphSnapshot",
    "ValidationError",
    "VolSeries",
    "WeekMapping",
    "assortativity",
    "assortativity_quad",
    "build_snapshot",
    "change_output_index",
    "component_stats",
    "daily_vol_series",
    "degree_filter_count",
    "generate_synthetic",
    "gini",
    "hits",
    "load_candles_csv",
    "pagerank",
    "parse_record",
    "pattern_histogram",
    "replay",
    "rolling_sweep",
    "run",
    "scc",
    "score_partition",
    "serialize_record",
    "top_c",
    "vol1",
    "wcc",
    "wilcoxon_signed_rank",
    "yearly_stats",
]
