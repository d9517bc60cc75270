import io

import pytest

from conftest import G0_LEDGER, loan
from errors import LedgerParseError, MixedCurrencyError
from ingest import (
    RULE_CANONICAL_NAME,
    RULE_MISSING_AMOUNT,
    RULE_MISSING_PARTY,
    RULE_NO_CREDIT_HISTORY,
    RULE_PERIOD_WINDOW,
    RULE_SPECIAL_TREATMENT,
    LedgerManager,
    parse_alias_table,
    parse_loans,
    preprocess,
    slice_periods,
    write_ledger,
)

HEADER = G0_LEDGER.splitlines()[0]


def ledger(*rows):
    return '\n'.join([HEADER, *rows]).encode('utf-8') + b'\n'


def test_parse_maps_fields():
    records = parse_loans(ledger("2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false"))
    assert len(records) == 1
    record = records[0]
    assert record.period == 2003
    assert record.amount == 100.0
    assert record.lender_id == 'B1' and record.borrower_id == 'F1'
    assert record.lender_type == 'state-owned'
    assert record.special_treatment is False


def test_parse_keeps_missing_amount_absent():
    records = parse_loans(ledger("2003,B1,BankA,state-owned,F1,FirmX,real-estate,,CNY,false"))
    assert records[0].amount is None


def test_parse_reads_stream_and_path(g0_csv):
    from_path = parse_loans(g0_csv)
    from_stream = parse_loans(io.BytesIO(G0_LEDGER.encode('utf-8')))
    assert from_path == from_stream
    assert [r.amount for r in from_path] == [100.0, 50.0, 200.0]


@pytest.mark.parametrize('row, column', [
    ("20x3,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false", 'period'),
    ("2003,B1,BankA,state-owned,F1,FirmX,real-estate,lots,CNY,false", 'amount'),
    ("2003,B1,BankA,state-owned,F1,FirmX,real-estate,-5,CNY,false", 'amount'),
    ("2003,B1,BankA,state-owned,F1,FirmX,real-estate,5,CNY,maybe", 'special_treatment'),
])
def test_parse_error_names_row_and_column(row, column):
    good = "2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false"
    with pytest.raises(LedgerParseError) as info:
        parse_loans(ledger(good, row), source_name='loans.csv')
    assert info.value.row == 3
    assert info.value.column == column
    assert 'loans.csv' in str(info.value)


def test_parse_rejects_wrong_header():
    with pytest.raises(LedgerParseError) as info:
        parse_loans(b"period,lender,amount\n2003,B1,100\n")
    assert info.value.row == 1


def test_parse_reports_ragged_row():
    with pytest.raises(LedgerParseError) as info:
        parse_loans(ledger(
            "2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false",
            "2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false,extra",
        ))
    assert info.value.row == 3


def test_parse_reports_invalid_utf8_location():
    data = ledger("2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false").replace(b'BankA', b'Bank\xff')
    with pytest.raises(LedgerParseError) as info:
        parse_loans(data, source_name='loans.csv')
    assert info.value.row == 2
    assert info.value.column == 'lender_name'
    assert info.value.source == 'loans.csv'


def test_parse_accepts_byte_order_mark():
    records = parse_loans(b'\xef\xbb\xbf' + G0_LEDGER.encode('utf-8'))
    assert len(records) == 3


def test_parse_rows_count_physical_lines():
    good = "2003,B1,BankA,state-owned,F1,FirmX,real-estate,100,CNY,false"
    quoted = '2003,B1,"Bank\nA",state-owned,F1,FirmX,real-estate,100,CNY,false'
    bad = "2003,B1,BankA,state-owned,F1,FirmX,real-estate,lots,CNY,false"
    with pytest.raises(LedgerParseError) as info:
        parse_loans(ledger(good, '', quoted, bad))
    assert info.value.row == 6
    assert info.value.column == 'amount'


def alias_fixture():
    return [
        loan('L1', 'F1', 10.0, lender_name='Bank of X'),
        loan('L2', 'F2', 20.0, lender_name='BOX'),
        loan('L3', 'F1', 5.0, lender_name='Other'),
        loan('L4', 'F3', None, lender_name='Bank Z'),
        loan('L5', 'F4', 7.0, lender_name='Bank Z', special_treatment=True),
    ]


def test_preprocess_applies_rules_and_aliases():
    records, report = preprocess(alias_fixture(), aliases={'BOX': 'Bank of X'})
    assert report.removed[RULE_MISSING_PARTY] == 0
    assert report.removed[RULE_MISSING_AMOUNT] == 1
    assert report.removed[RULE_SPECIAL_TREATMENT] == 1
    assert report.removed[RULE_NO_CREDIT_HISTORY] == 0
    assert report.removed[RULE_CANONICAL_NAME] == 0
    assert report.retained == 3
    assert report.raw_count == 5
    assert report.canonicalized == 1

    by_borrower = {r.borrower_id: r for r in records if r.lender_name == 'Bank of X'}
    assert by_borrower['F1'].lender_id == by_borrower['F2'].lender_id == 'L1'


def test_preprocess_drops_missing_parties():
    records = [loan(None, 'F1', 10.0), loan('B1', None, 10.0), loan('B1', 'F2', 10.0)]
    kept, report = preprocess(records)
    assert report.removed[RULE_MISSING_PARTY] == 2
    assert [(r.lender_id, r.borrower_id) for r in kept] == [('B1', 'F2')]


def test_preprocess_excludes_special_treatment_borrower_wholly():
    records = [
        loan('B1', 'F1', 10.0, special_treatment=True),
        loan('B2', 'F1', 10.0, special_treatment=True),
        loan('B1', 'F2', 10.0),
    ]
    kept, report = preprocess(records)
    assert report.removed[RULE_SPECIAL_TREATMENT] == 2
    assert {r.borrower_id for r in kept} == {'F2'}


def test_preprocess_drops_zero_amount_records_as_no_history():
    kept, report = preprocess([loan('B1', 'F1', 0.0), loan('B1', 'F2', 3.0)])
    assert [r.borrower_id for r in kept] == ['F2']
    assert report.removed[RULE_NO_CREDIT_HISTORY] == 1


def test_preprocess_is_idempotent():
    aliases = {'BOX': 'Bank of X'}
    once, _ = preprocess(alias_fixture(), aliases=aliases)
    twice, report = preprocess(once, aliases=aliases)
    assert twice == once
    assert sum(report.removed.values()) == 0
    assert report.canonicalized == 0


def test_rule_order_changes_report():
    records = [
        loan('B1', 'F1', None, special_treatment=True),
        loan('B1', 'F9', None),
        loan('B1', 'F2', 4.0),
    ]
    _, default = preprocess(records)
    _, permuted = preprocess(records, rule_order=(RULE_NO_CREDIT_HISTORY, RULE_SPECIAL_TREATMENT,
                                                  RULE_MISSING_AMOUNT, RULE_MISSING_PARTY))
    assert default.removed[RULE_MISSING_AMOUNT] == 2
    assert permuted.removed[RULE_NO_CREDIT_HISTORY] == 2
    assert default.to_dict() != permuted.to_dict()
    assert default.retained == permuted.retained == 1


def test_preprocess_rejects_mixed_currency():
    with pytest.raises(MixedCurrencyError):
        preprocess([loan('B1', 'F1', 1.0), loan('B1', 'F2', 1.0, currency='USD')])


def test_preprocess_applies_period_window():
    records = [loan('B1', 'F1', 1.0, period=1999), loan('B1', 'F1', 1.0, period=2003)]
    kept, report = preprocess(records, period_range=(2000, 2014))
    assert [r.period for r in kept] == [2003]
    assert report.removed[RULE_PERIOD_WINDOW] == 1
    assert report.raw_count == 2


def test_slice_periods_partitions_records():
    records = [loan('B1', 'F1', 1.0, period=2001), loan('B1', 'F1', 2.0, period=2000), loan('B2', 'F1', 3.0, period=2001)]
    slices = slice_periods(records)
    assert list(slices) == [2000, 2001]
    assert sum(len(s) for s in slices.values()) == len(records)
    assert slice_periods([]) == {}
    assert len(slice_periods([loan('B1', 'F1', 1.0, period=2014)] * 3)[2014]) == 3


def test_slicing_preserves_retained_count():
    kept, report = preprocess(alias_fixture(), aliases={'BOX': 'Bank of X'})
    assert sum(len(s) for s in slice_periods(kept).values()) == report.retained


def test_alias_chains_resolve(tmp_path):
    path = tmp_path / 'aliases.csv'
    path.write_text("raw_name,canonical_name\nBOX,Bank X\nBank X,Bank of X\n", encoding='utf-8')
    assert parse_alias_table(path) == {'BOX': 'Bank of X', 'Bank X': 'Bank of X'}


def test_written_ledger_parses_back(tmp_path, g0_records):
    records = g0_records + [loan('B3', 'F3', None)]
    path = tmp_path / 'ledger.csv'
    write_ledger(records, path)
    assert parse_loans(path) == records


def test_ledger_manager_loads_periods(g0_csv):
    slices, report = LedgerManager(period_range=(2000, 2014)).load_periods(g0_csv)
    assert list(slices) == [2003]
    assert report.retained == 3
