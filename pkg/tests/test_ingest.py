import random

import pytest

from bunforge.errors import RecordError, ValidationError
from bunforge.ingest import (
    FileSource,
    SyntheticSource,
    WeekMapping,
    format_btc,
    generate_synthetic,
    parse_record,
    serialize_record,
    write_jsonl,
)


class TestParseRecord:
    def test_table1_first_transaction(self):
        tx = parse_record('{"txid":"T1","height":0,"week":0,"inputs":[["A",5]],"outputs":[["B",4],["C",1]]}')
        assert tx.txid == "T1"
        assert tx.inputs == (("A", 5.0),)
        assert tx.outputs == (("B", 4.0), ("C", 1.0))
        assert not tx.is_coinbase

    def test_coinbase_has_empty_inputs(self):
        tx = parse_record('{"txid":"CB","height":0,"week":0,"inputs":[],"outputs":[["X",50]]}')
        assert tx.is_coinbase
        assert tx.outputs == (("X", 50.0),)

    def test_negative_value_names_field_and_line(self):
        line = '{"txid":"T9","height":0,"week":0,"inputs":[["A",-1]],"outputs":[["B",1]]}'
        with pytest.raises(RecordError, match=r"line 12.*inputs\[0\].*negative"):
            parse_record(line, line_no=12)

    def test_empty_outputs_rejected(self):
        line = '{"txid":"T","height":0,"week":0,"inputs":[["A",1]],"outputs":[]}'
        with pytest.raises(RecordError, match="outputs"):
            parse_record(line)

    def test_week_height_mismatch(self):
        line = '{"txid":"T","height":5000,"week":0,"inputs":[["A",1]],"outputs":[["B",1]]}'
        with pytest.raises(RecordError, match="week 0 does not match height 5000"):
            parse_record(line)

    def test_week_follows_configured_mapping(self):
        line = '{"txid":"T","height":5000,"week":4,"inputs":[["A",1]],"outputs":[["B",1]]}'
        assert parse_record(line).week == 4
        custom = WeekMapping(genesis_height=5000, blocks_per_week=100)
        line2 = '{"txid":"T","height":5250,"week":2,"inputs":[["A",1]],"outputs":[["B",1]]}'
        assert parse_record(line2, week_map=custom).week == 2

    def test_malformed_syntax(self):
        with pytest.raises(RecordError, match="malformed syntax"):
            parse_record('{"txid": nope}', line_no=3)

    def test_wrong_keys(self):
        with pytest.raises(RecordError, match="missing"):
            parse_record('{"txid":"T","height":0,"week":0,"inputs":[]}')
        with pytest.raises(RecordError, match="unexpected"):
            parse_record('{"txid":"T","height":0,"week":0,"inputs":[],"outputs":[["X",1]],"fee":0}')

    def test_empty_address_rejected(self):
        line = '{"txid":"T","height":0,"week":0,"inputs":[["",1]],"outputs":[["B",1]]}'
        with pytest.raises(RecordError, match="address"):
            parse_record(line)

    def test_boolean_value_rejected(self):
        line = '{"txid":"T","height":0,"week":0,"inputs":[["A",true]],"outputs":[["B",1]]}'
        with pytest.raises(RecordError, match="number"):
            parse_record(line)


class TestSerialization:
    def test_value_formatting(self):
        assert format_btc(5.0) == "5"
        assert format_btc(2.5) == "2.5"
        assert format_btc(1e-08) == "0.00000001"
        assert format_btc(0.0) == "0"
        assert format_btc(1.1) == "1.1"

    @pytest.mark.parametrize(
        "line",
        [
            '{"txid":"T1","height":0,"week":0,"inputs":[["A",5]],"outputs":[["B",4],["C",1]]}',
            '{"txid":"CB","height":0,"week":0,"inputs":[],"outputs":[["X",50]]}',
            '{"txid":"T","height":0,"week":0,"inputs":[["A",0.00000001]],"outputs":[["B",2.5],["C",0.1]]}',
        ],
    )
    def test_round_trip_is_canonical(self, line):
        assert serialize_record(parse_record(line)) == line

    def test_parse_serialize_parse_is_identity_on_synthetic(self):
        source = generate_synthetic(3, 200, {"1-1": 0.2, "1-2": 0.5, "1-3": 0.15, "other": 0.15})
        for tx in source:
            again = parse_record(serialize_record(tx))
            assert again == tx


class TestFileSource:
    def test_reads_in_order(self, tmp_path, table1_txs):
        path = tmp_path / "txs.jsonl"
        write_jsonl(path, table1_txs)
        assert list(FileSource(path)) == table1_txs

    def test_resume_matches_single_pass(self, tmp_path):
        source = generate_synthetic(11, 50, {"1-2": 1.0})
        txs = list(source)
        path = tmp_path / "txs.jsonl"
        write_jsonl(path, txs)

        first = FileSource(path)
        it = iter(first)
        head = [next(it) for _ in range(20)]
        rest = list(FileSource(path, cursor=first.cursor))
        assert head + rest == txs

    def test_height_order_enforced(self, tmp_path):
        lines = [
            '{"txid":"A","height":3,"week":0,"inputs":[],"outputs":[["X",1]]}',
            '{"txid":"B","height":2,"week":0,"inputs":[],"outputs":[["Y",1]]}',
        ]
        path = tmp_path / "bad.jsonl"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValidationError, match="height order"):
            list(FileSource(path))


class TestSyntheticSource:
    def test_empty_stream(self):
        assert list(generate_synthetic(7, 0, {"1-2": 1.0})) == []

    def test_degenerate_mix_shapes(self):
        txs = list(generate_synthetic(7, 10_000, {"1-2": 1.0}))
        assert len(txs) == 10_000
        assert all(tx.shape() == (1, 2) for tx in txs)

    def test_mix_convergence_within_one_percent(self):
        mix = {"1-1": 0.25, "1-2": 0.51, "1-3": 0.12, "other": 0.12}
        txs = list(generate_synthetic(7, 10_000, mix))
        counts = {"1-1": 0, "1-2": 0, "1-3": 0, "other": 0}
        for tx in txs:
            n_in, n_out = tx.shape()
            key = f"{n_in}-{n_out}"
            counts[key if key in counts else "other"] += 1
        for key, p in mix.items():
            assert abs(counts[key] / 10_000 - p) <= 0.01, (key, counts)

    def test_other_shapes_are_not_the_named_ones(self):
        txs = list(generate_synthetic(5, 2_000, {"other": 1.0}))
        assert all(tx.shape() not in ((1, 1), (1, 2), (1, 3)) for tx in txs)

    @pytest.mark.parametrize(
        "mix,msg",
        [
            ({"1-2": 0.9}, "sum"),
            ({"1-2": 1.2, "1-1": -0.2}, "negative"),
            ({"1-9": 1.0}, "unknown pattern"),
            ({}, "empty"),
        ],
    )
    def test_invalid_mix(self, mix, msg):
        with pytest.raises(ValidationError, match=msg):
            generate_synthetic(7, 10, mix)

    def test_negative_count_rejected(self):
        with pytest.raises(ValidationError, match="n_tx"):
            generate_synthetic(7, -1, {"1-2": 1.0})

    def test_deterministic_for_fixed_seed(self):
        mix = {"1-1": 0.3, "1-2": 0.4, "other": 0.3}
        a = list(generate_synthetic(42, 500, mix))
        b = list(generate_synthetic(42, 500, mix))
        assert a == b

    def test_resume_reproduces_suffix(self):
        mix = {"1-2": 0.6, "other": 0.4}
        full = list(generate_synthetic(9, 300, mix))
        resumed = list(SyntheticSource(9, 300, mix, cursor=120))
        assert resumed == full[120:]

    def test_truth_covers_every_address_exactly_once(self):
        source = generate_synthetic(13, 1_000, {"1-1": 0.2, "1-2": 0.5, "1-3": 0.2, "other": 0.1})
        seen = set()
        for tx in source:
            for addr, _v in tx.inputs:
                seen.add(addr)
            for addr, _v in tx.outputs:
                seen.add(addr)
        assert set(source.truth) == seen

    def test_weeks_follow_heights(self):
        source = SyntheticSource(1, 200, {"1-2": 1.0}, txs_per_block=10, week_map=WeekMapping(blocks_per_week=5))
        for i, tx in enumerate(source):
            assert tx.height == i // 10
            assert tx.week == tx.height // 5

    def test_change_output_is_strict_minimum(self):
        # default generator always routes change; the smallest output must be unique
        rng = random.Random(0)
        for seed in [rng.randrange(10_000) for _ in range(3)]:
            for tx in generate_synthetic(seed, 400, {"1-2": 0.5, "1-3": 0.3, "other": 0.2}):
                if tx.inputs and len(tx.outputs) >= 2:
                    values = [v for _a, v in tx.outputs]
                    smallest = min(values)
                    assert values.count(smallest) == 1
