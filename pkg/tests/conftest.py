import networkx as nx
import numpy as np
import pytest

from bipartite_graph import build_bipartite
from ingest import LoanRecord

G0_LEDGER = """period,lender_id,lender_name,lender_type,borrower_id,borrower_name,borrower_industry,amount,currency,special_treatment
2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false
2003,B1,BankA,state-owned,F2,FirmY,cement,50,CNY,false
2003,B2,BankB,policy,F2,FirmY,cement,200,CNY,false
"""


def loan(lender, borrower, amount, period=2003, lender_type='state-owned', industry='real-estate', **overrides):
    values = dict(
        period=period,
        lender_id=lender,
        lender_name=f"Bank {lender}" if lender else '',
        lender_type=lender_type,
        borrower_id=borrower,
        borrower_name=f"Firm {borrower}" if borrower else '',
        borrower_industry=industry,
        amount=amount,
        currency='CNY',
        special_treatment=False,
    )
    values.update(overrides)
    return LoanRecord(**values)


def random_network(seed, n_institutions=10, n_firms=10, p=0.3, period=2003):
    """Random bipartite network; every vertex keeps at least one loan."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_institutions):
        for j in range(n_firms):
            if rng.random() < p:
                records.append(loan(f"B{i:02d}", f"F{j:02d}", float(rng.integers(1, 100)), period=period))
    if not records:
        records.append(loan('B00', 'F00', 1.0, period=period))
    return build_bipartite(records)


@pytest.fixture
def g0_records():
    return [
        loan('B1', 'F1', 100.0, lender_type='state-owned', industry='real-estate'),
        loan('B1', 'F2', 50.0, lender_type='state-owned', industry='cement'),
        loan('B2', 'F2', 200.0, lender_type='policy', industry='cement'),
    ]


@pytest.fixture
def g0(g0_records):
    return build_bipartite(g0_records)


@pytest.fixture
def g0_csv(tmp_path):
    path = tmp_path / 'g0.csv'
    path.write_text(G0_LEDGER, encoding='utf-8')
    return path


@pytest.fixture
def path3():
    return nx.path_graph(['A', 'B', 'C'])


@pytest.fixture
def cycle4():
    return nx.cycle_graph(['A', 'B', 'C', 'D'])


@pytest.fixture
def star4():
    return nx.star_graph(4)
