"""Transaction record model, JSONL parsing, and stream sources.

One record per line, keys exactly ``txid, height, week, inputs, outputs``;
inputs/outputs are arrays of ``[address, value]`` pairs with values in BTC
(at most 8 fractional digits). Output order is preserved because the
change heuristic breaks value ties by output position.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .errors import RecordError, ValidationError

PATTERN_KEYS = ("1-1", "1-2", "1-3", "other")

# (inputs, outputs) shapes the synthetic generator draws from for "other"
_OTHER_SHAPES = ((2, 1), (2, 2), (3, 2), (2, 3), (1, 4), (4, 1))


@dataclass(frozen=True)
class WeekMapping:
    """Maps block height to a weekly snapshot index.

    week = floor((height - genesis_height) / blocks_per_week); the default
    1008 blocks approximate seven days at one block per ten minutes.
    """

    genesis_height: int = 0
    blocks_per_week: int = 1008

    def week_of(self, height: int) -> int:
        return (height - self.genesis_height) // self.blocks_per_week


DEFAULT_WEEK_MAPPING = WeekMapping()


@dataclass(frozen=True)
class TxRecord:
    """One validated transaction; empty inputs mean coinbase."""

    txid: str
    height: int
    week: int
    inputs: tuple[tuple[str, float], ...]
    outputs: tuple[tuple[str, float], ...]

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    def shape(self) -> tuple[int, int]:
        return (len(self.inputs), len(self.outputs))


def format_btc(value: float) -> str:
    """Fixed-point decimal with at most 8 fractional digits, no exponent."""
    s = f"{value:.8f}".rstrip("0").rstrip(".")
    return s or "0"


def serialize_record(tx: TxRecord) -> str:
    """Canonical JSONL line for a record (inverse of parse_record)."""

    def pairs(items):
        return ",".join(f"[{json.dumps(a)},{format_btc(v)}]" for a, v in items)

    return (
        f'{{"txid":{json.dumps(tx.txid)},"height":{tx.height},"week":{tx.week},'
        f'"inputs":[{pairs(tx.inputs)}],"outputs":[{pairs(tx.outputs)}]}}'
    )


def _check_pairs(raw, name: str, line_no) -> tuple[tuple[str, float], ...]:
    if not isinstance(raw, list):
        raise RecordError("expected an array of [address, value] pairs", field=name, line_no=line_no)
    out = []
    for i, item in enumerate(raw):
        where = f"{name}[{i}]"
        if not isinstance(item, list) or len(item) != 2:
            raise RecordError("expected an [address, value] pair", field=where, line_no=line_no)
        addr, value = item
        if not isinstance(addr, str) or not addr:
            raise RecordError("address must be a non-empty string", field=where, line_no=line_no)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RecordError("value must be a number", field=where, line_no=line_no)
        value = float(value)
        if not math.isfinite(value):
            raise RecordError("value must be finite", field=where, line_no=line_no)
        if value < 0:
            raise RecordError(f"negative value {value}", field=where, line_no=line_no)
        out.append((addr, value))
    return tuple(out)


_RECORD_KEYS = {"txid", "height", "week", "inputs", "outputs"}


def parse_record(
    line: str,
    line_no: int | None = None,
    week_map: WeekMapping = DEFAULT_WEEK_MAPPING,
) -> TxRecord:
    """Parse and validate one JSONL transaction line.

    Rejects malformed syntax, negative values, empty outputs, and a week
    index that disagrees with the height under ``week_map``; every error
    names the offending field and line number.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise RecordError(f"malformed syntax: {e.msg}", line_no=line_no) from None
    if not isinstance(obj, dict):
        raise RecordError("malformed syntax: record must be a JSON object", line_no=line_no)
    if set(obj) != _RECORD_KEYS:
        missing = _RECORD_KEYS - set(obj)
        extra = set(obj) - _RECORD_KEYS
        what = []
        if missing:
            what.append(f"missing {sorted(missing)}")
        if extra:
            what.append(f"unexpected {sorted(extra)}")
        raise RecordError("bad keys: " + ", ".join(what), line_no=line_no)

    txid = obj["txid"]
    if not isinstance(txid, str) or not txid:
        raise RecordError("txid must be a non-empty string", field="txid", line_no=line_no)
    height = obj["height"]
    if isinstance(height, bool) or not isinstance(height, int) or height < 0:
        raise RecordError("height must be a non-negative integer", field="height", line_no=line_no)
    week = obj["week"]
    if isinstance(week, bool) or not isinstance(week, int) or week < 0:
        raise RecordError("week must be a non-negative integer", field="week", line_no=line_no)
    expected = week_map.week_of(height)
    if week != expected:
        raise RecordError(
            f"week {week} does not match height {height} (expected week {expected})",
            field="week",
            line_no=line_no,
        )
    inputs = _check_pairs(obj["inputs"], "inputs", line_no)
    outputs = _check_pairs(obj["outputs"], "outputs", line_no)
    if not outputs:
        raise RecordError("outputs must be non-empty", field="outputs", line_no=line_no)
    return TxRecord(txid=txid, height=height, week=week, inputs=inputs, outputs=outputs)


class FileSource:
    """Reads TxRecords from a JSONL file in strict height order.

    The cursor is a byte offset; re-opening at a cursor reproduces the
    identical suffix stream.
    """

    kind = "file"

    def __init__(self, path, week_map: WeekMapping = DEFAULT_WEEK_MAPPING, cursor: int = 0):
        self.path = path
        self.week_map = week_map
        self.cursor = cursor
        self._resumed = cursor != 0

    def __iter__(self):
        last_height = -1
        line_no = 0 if not self._resumed else None
        with open(self.path, "rb") as f:
            f.seek(self.cursor)
            while True:
                raw = f.readline()
                if not raw:
                    break
                self.cursor += len(raw)
                if line_no is not None:
                    line_no += 1
                line = raw.decode("utf-8").strip()
                if not line:
                    continue
                tx = parse_record(line, line_no=line_no, week_map=self.week_map)
                if tx.height < last_height:
                    raise ValidationError(
                        f"{self.path}: height order violated at txid {tx.txid} "
                        f"(height {tx.height} after {last_height})"
                    )
                last_height = tx.height
                yield tx


def read_jsonl(path, week_map: WeekMapping = DEFAULT_WEEK_MAPPING) -> list[TxRecord]:
    return list(FileSource(path, week_map=week_map))


def write_jsonl(path, txs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for tx in txs:
            f.write(serialize_record(tx) + "\n")


def _validate_mix(pattern_mix: dict) -> list[tuple[str, float]]:
    if not pattern_mix:
        raise ValidationError("invalid mix: empty")
    total = 0.0
    items = []
    for key, p in pattern_mix.items():
        if key not in PATTERN_KEYS:
            raise ValidationError(f"invalid mix: unknown pattern {key!r} (expected one of {PATTERN_KEYS})")
        p = float(p)
        if p < 0:
            raise ValidationError(f"invalid mix: negative probability for {key!r}")
        total += p
        items.append((key, p))
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"invalid mix: probabilities sum to {total!r}, expected 1")
    return items


class SyntheticSource:
    """Deterministic synthetic transaction stream with known ground truth.

    Entities own growing address wallets; each transaction spends from one
    entity (multi-input shapes reuse or mint that entity's addresses) and,
    for multi-output shapes, routes a strictly-smallest change output back
    to the sender. ``truth`` maps every emitted address to its entity id
    and is complete once the stream is exhausted.

    The cursor is the number of records emitted; resuming regenerates and
    skips, which reproduces the identical suffix.
    """

    kind = "synthetic"

    def __init__(
        self,
        seed: int,
        n_tx: int,
        pattern_mix: dict[str, float],
        *,
        txs_per_block: int = 50,
        week_map: WeekMapping = DEFAULT_WEEK_MAPPING,
        change_probability: float = 1.0,
        cursor: int = 0,
    ):
        if n_tx < 0:
            raise ValidationError(f"n_tx must be >= 0, got {n_tx}")
        self._mix = _validate_mix(pattern_mix)
        self.seed = seed
        self.n_tx = n_tx
        self.pattern_mix = dict(pattern_mix)
        self.txs_per_block = txs_per_block
        self.week_map = week_map
        self.change_probability = change_probability
        self.cursor = cursor
        self._skip = cursor

        self._rng = random.Random(seed)
        self._entities: list[list[str]] = []
        self._addr_count = 0
        self.truth: dict[str, int] = {}

        # cumulative thresholds for pattern selection
        self._cum = []
        acc = 0.0
        for key, p in self._mix:
            acc += p
            self._cum.append((acc, key))

    def _pick_pattern(self) -> str:
        u = self._rng.random()
        for threshold, key in self._cum:
            if u < threshold:
                return key
        return self._cum[-1][1]

    def _new_entity(self) -> int:
        self._entities.append([])
        return len(self._entities) - 1

    def _new_address(self, entity: int) -> str:
        name = f"addr{self._addr_count:08d}"
        self._addr_count += 1
        self._entities[entity].append(name)
        self.truth[name] = entity
        return name

    def _pick_entity(self, exclude: int | None = None) -> int:
        rng = self._rng
        if not self._entities or rng.random() < 0.25:
            return self._new_entity()
        for _ in range(8):
            e = rng.randrange(len(self._entities))
            if e != exclude:
                return e
        return self._new_entity()

    def _input_addresses(self, entity: int, n: int) -> list[str]:
        rng = self._rng
        wallet = self._entities[entity]
        chosen: list[str] = []
        seen: set[str] = set()
        for _ in range(n):
            addr = None
            if wallet and rng.random() < 0.6:
                for _ in range(4):
                    cand = rng.choice(wallet)
                    if cand not in seen:
                        addr = cand
                        break
            if addr is None:
                addr = self._new_address(entity)
            chosen.append(addr)
            seen.add(addr)
        return chosen

    def _recipient_address(self, entity: int) -> str:
        rng = self._rng
        wallet = self._entities[entity]
        if wallet and rng.random() < 0.2:
            return rng.choice(wallet)
        return self._new_address(entity)

    def _make_tx(self, i: int) -> TxRecord:
        rng = self._rng
        pattern = self._pick_pattern()
        if pattern == "other":
            n_in, n_out = rng.choice(_OTHER_SHAPES)
        else:
            n_in, n_out = 1, int(pattern[-1])

        sender = self._pick_entity()
        in_addrs = self._input_addresses(sender, n_in)
        in_vals = [round(rng.uniform(0.01, 5.0), 8) for _ in range(n_in)]
        total = round(sum(in_vals), 8)

        if n_out == 1:
            recipient = self._pick_entity(exclude=sender)
            outputs = [(self._recipient_address(recipient), total)]
        else:
            with_change = rng.random() < self.change_probability
            n_pay = n_out - 1 if with_change else n_out
            weights = [rng.uniform(1.0, 10.0) for _ in range(n_pay)]
            if with_change:
                weights.append(rng.uniform(0.05, 0.5) * min(weights))
            scale = total / sum(weights)
            vals = [round(w * scale, 8) for w in weights]
            pay_vals, change_val = (vals[:-1], vals[-1]) if with_change else (vals, None)
            outputs = []
            for v in pay_vals:
                recipient = self._pick_entity(exclude=sender)
                outputs.append((self._recipient_address(recipient), v))
            if with_change:
                # keep the change strictly below every payment after rounding
                floor = min(v for v in pay_vals)
                if change_val >= floor:
                    change_val = round(floor * 0.5, 8) or 1e-08
                outputs.insert(rng.randrange(n_out), (self._new_address(sender), change_val))

        height = i // self.txs_per_block
        return TxRecord(
            txid=f"tx{i:08d}",
            height=height,
            week=self.week_map.week_of(height),
            inputs=tuple(zip(in_addrs, in_vals)),
            outputs=tuple(outputs),
        )

    def __iter__(self):
        for i in range(self.n_tx):
            tx = self._make_tx(i)
            if i < self._skip:
                continue
            self.cursor = i + 1
            yield tx


def generate_synthetic(
    seed: int,
    n_tx: int,
    pattern_mix: dict[str, float],
    **kwargs,
) -> SyntheticSource:
    """Build a deterministic synthetic stream; see SyntheticSource."""
    return SyntheticSource(seed, n_tx, pattern_mix, **kwargs)
