"""JSON-RPC 1.0 client for a Bitcoin Core style node.

Only ``getblockhash(height)`` and ``getblock(hash, 2)`` are used. Input
addresses are resolved by following each input's previous-output reference
through a bounded LRU of recently seen outputs, with an on-demand walk to
older blocks when the reference predates the fetch window. Records whose
inputs stay unresolvable are skipped and counted, never silently dropped.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import requests

from .errors import EndpointUnreachableError, RpcError, UnknownHeightError, ValidationError
from .ingest import DEFAULT_WEEK_MAPPING, TxRecord, WeekMapping

# Bitcoin Core uses -8 (out of range) and -5 (not found) for bad heights/hashes
_HEIGHT_ERROR_CODES = {-8, -5}


class RpcClient:
    def __init__(self, url: str, auth: str | None = None, timeout: float = 5.0):
        self.url = url
        self.timeout = timeout
        self._auth = tuple(auth.split(":", 1)) if auth else None
        self._session = requests.Session()
        self._id = 0

    def call(self, method: str, params: list):
        self._id += 1
        payload = {"jsonrpc": "1.0", "id": self._id, "method": method, "params": params}
        try:
            resp = self._session.post(self.url, json=payload, auth=self._auth, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as e:
            raise EndpointUnreachableError(f"{self.url}: {e}") from None
        try:
            body = resp.json()
        except ValueError:
            raise RpcError(f"{method}: non-JSON response (HTTP {resp.status_code})") from None
        err = body.get("error")
        if err:
            code = err.get("code") if isinstance(err, dict) else None
            message = err.get("message") if isinstance(err, dict) else str(err)
            if code in _HEIGHT_ERROR_CODES:
                raise UnknownHeightError(f"{method}{params}: {message}")
            raise RpcError(f"{method}{params}: {message}")
        return body["result"]

    def getblockhash(self, height: int) -> str:
        return self.call("getblockhash", [height])

    def getblock(self, block_hash: str, verbosity: int = 2) -> dict:
        return self.call("getblock", [block_hash, verbosity])


def _vout_address(vout: dict) -> str | None:
    spk = vout.get("scriptPubKey") or {}
    addr = spk.get("address")
    if addr:
        return addr
    addrs = spk.get("addresses")
    if addrs:
        return addrs[0]
    return None


@dataclass
class FetchStats:
    records: int = 0
    skipped_unresolvable: int = 0
    lookback_blocks: int = 0
    skipped_txids: list[str] = field(default_factory=list)


class RpcSource:
    """Streams TxRecords for blocks ``from_height..to_height`` inclusive.

    The cursor is the next block height, updated after each fully emitted
    block, so an interrupted fetch resumes exactly.
    """

    kind = "rpc"

    def __init__(
        self,
        client: RpcClient,
        from_height: int,
        to_height: int,
        *,
        week_map: WeekMapping = DEFAULT_WEEK_MAPPING,
        max_lookback: int = 1000,
        cache_size: int = 500_000,
    ):
        if from_height > to_height:
            raise ValidationError(f"empty height range: from {from_height} > to {to_height}")
        self.client = client
        self.from_height = from_height
        self.to_height = to_height
        self.week_map = week_map
        self.max_lookback = max_lookback
        self.cache_size = cache_size
        self.cursor = from_height
        self.stats = FetchStats()
        # (txid, vout index) -> (address, value); spent entries are popped
        self._outputs: OrderedDict[tuple[str, int], tuple[str, float]] = OrderedDict()

    def _cache_block_outputs(self, block: dict) -> None:
        for tx in block.get("tx", []):
            txid = tx["txid"]
            for vout in tx.get("vout", []):
                addr = _vout_address(vout)
                if addr is None:
                    continue
                self._outputs[(txid, vout["n"])] = (addr, float(vout["value"]))
                if len(self._outputs) > self.cache_size:
                    self._outputs.popitem(last=False)

    def _lookback(self, key: tuple[str, int], below_height: int) -> tuple[str, float] | None:
        h = below_height - 1
        floor = max(0, below_height - self.max_lookback)
        while h >= floor:
            try:
                block = self.client.getblock(self.client.getblockhash(h), 2)
            except UnknownHeightError:
                # pruned or absent history; the record stays unresolvable
                return None
            self.stats.lookback_blocks += 1
            self._cache_block_outputs(block)
            if key in self._outputs:
                return self._outputs.pop(key)
            h -= 1
        return None

    def _resolve_inputs(self, tx: dict, height: int) -> list[tuple[str, float]] | None:
        resolved = []
        for vin in tx.get("vin", []):
            key = (vin["txid"], vin["vout"])
            hit = self._outputs.pop(key, None)
            if hit is None:
                hit = self._lookback(key, height)
            if hit is None:
                return None
            resolved.append(hit)
        return resolved

    def __iter__(self):
        for height in range(self.cursor, self.to_height + 1):
            block = self.client.getblock(self.client.getblockhash(height), 2)
            week = self.week_map.week_of(height)
            for tx in block.get("tx", []):
                txid = tx["txid"]
                outputs = []
                for vout in tx.get("vout", []):
                    addr = _vout_address(vout)
                    if addr is None:
                        continue
                    value = float(vout["value"])
                    outputs.append((addr, value))
                    self._outputs[(txid, vout["n"])] = (addr, value)
                    if len(self._outputs) > self.cache_size:
                        self._outputs.popitem(last=False)
                if not outputs:
                    self.stats.skipped_unresolvable += 1
                    self.stats.skipped_txids.append(txid)
                    continue
                vin = tx.get("vin", [])
                if len(vin) == 1 and "coinbase" in vin[0]:
                    inputs: list[tuple[str, float]] = []
                else:
                    maybe = self._resolve_inputs(tx, height)
                    if maybe is None:
                        self.stats.skipped_unresolvable += 1
                        self.stats.skipped_txids.append(txid)
                        continue
                    inputs = maybe
                self.stats.records += 1
                yield TxRecord(
                    txid=txid,
                    height=height,
                    week=week,
                    inputs=tuple(inputs),
                    outputs=tuple(outputs),
                )
            self.cursor = height + 1


def fetch_blocks(
    endpoint: str,
    from_height: int,
    to_height: int,
    *,
    auth: str | None = None,
    timeout: float = 5.0,
    **kwargs,
) -> RpcSource:
    """Convenience constructor for an RpcSource over a fresh client."""
    return RpcSource(RpcClient(endpoint, auth=auth, timeout=timeout), from_height, to_height, **kwargs)
