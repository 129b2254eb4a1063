import pytest

from bunforge.clustering import ClusterState
from bunforge.graph import build_snapshot
from bunforge.ingest import parse_record

# Worked three-transaction example: T1 spends A into B plus change C,
# T2 spends B into D plus change E, T3 spends C and D into F plus change G.
TABLE1_LINES = [
    '{"txid":"T1","height":0,"week":0,"inputs":[["A",5]],"outputs":[["B",4],["C",1]]}',
    '{"txid":"T2","height":0,"week":0,"inputs":[["B",3]],"outputs":[["D",2.5],["E",0.5]]}',
    '{"txid":"T3","height":0,"week":0,"inputs":[["C",1],["D",2.5]],"outputs":[["F",2.4],["G",1.1]]}',
]


@pytest.fixture
def table1_txs():
    return [parse_record(line) for line in TABLE1_LINES]


@pytest.fixture
def table1_state(table1_txs):
    state = ClusterState()
    for tx in table1_txs:
        state.apply_transaction(tx)
    return state


@pytest.fixture
def table1_snapshot(table1_txs, table1_state):
    return build_snapshot(table1_txs, table1_state, week=0, mode="cumulative")
