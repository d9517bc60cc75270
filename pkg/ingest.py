# ingest.py

import codecs
import csv
import io
import os
import re
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import LedgerParseError, MixedCurrencyError

LEDGER_COLUMNS = [
    'period', 'lender_id', 'lender_name', 'lender_type',
    'borrower_id', 'borrower_name', 'borrower_industry',
    'amount', 'currency', 'special_treatment',
]
ALIAS_COLUMNS = ['raw_name', 'canonical_name']

# Exclusion rule ids, numbered as the preprocessing rules are listed.
RULE_NO_CREDIT_HISTORY = 1
RULE_MISSING_PARTY = 2
RULE_MISSING_AMOUNT = 3
RULE_SPECIAL_TREATMENT = 4
RULE_CANONICAL_NAME = 5
RULE_PERIOD_WINDOW = 'window'

# Rule 1 runs after the record-level rules so a borrower whose every record was
# dropped counts as having no credit history.
DEFAULT_RULE_ORDER = (RULE_MISSING_PARTY, RULE_MISSING_AMOUNT, RULE_SPECIAL_TREATMENT, RULE_NO_CREDIT_HISTORY)

_TRUE_FLAGS = {'true', '1', 'yes', 'y', 't'}
_FALSE_FLAGS = {'false', '0', 'no', 'n', 'f', ''}


@dataclass(frozen=True)
class LoanRecord:
    period: int
    lender_id: Optional[str]
    lender_name: str
    lender_type: str
    borrower_id: Optional[str]
    borrower_name: str
    borrower_industry: str
    amount: Optional[float]
    currency: str
    special_treatment: bool = False


@dataclass
class ExclusionReport:
    removed: Dict[object, int] = field(default_factory=dict)
    retained: int = 0
    canonicalized: int = 0

    @property
    def raw_count(self) -> int:
        return sum(self.removed.values()) + self.retained

    def to_dict(self) -> dict:
        return {
            'removed': {str(rule): count for rule, count in self.removed.items()},
            'retained': self.retained,
            'canonicalized': self.canonicalized,
            'raw': self.raw_count,
        }


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, 'rb') as f:
            return f.read()
    data = source.read()
    return data.encode('utf-8') if isinstance(data, str) else data


def _decode(data: bytes, source_name: str = None, columns: Sequence[str] = LEDGER_COLUMNS) -> str:
    if data.startswith(codecs.BOM_UTF8):
        data = data[len(codecs.BOM_UTF8):]
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        row = data.count(b'\n', 0, e.start) + 1
        line_start = data.rfind(b'\n', 0, e.start) + 1
        position = data.count(b',', line_start, e.start)
        column = columns[position] if row > 1 and position < len(columns) else None
        raise LedgerParseError(f"invalid UTF-8 byte 0x{data[e.start]:02x}", row=row, column=column, source=source_name) from e


def _record_lines(text: str) -> List[int]:
    """First physical line of every data record; blank lines are skipped as pandas skips them."""
    reader = csv.reader(io.StringIO(text))
    lines, previous = [], 0
    for fields in reader:
        blank = not fields or (len(fields) == 1 and not fields[0].strip())
        if not blank:
            lines.append(previous + 1)
        previous = reader.line_num
    return lines[1:]


def _read_delimited(source, source_name: str = None, columns: Sequence[str] = LEDGER_COLUMNS) -> Tuple[pd.DataFrame, List[int]]:
    """Frame of string cells and, per frame row, its line number in the source."""
    text = _decode(_read_bytes(source), source_name, columns)
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        row = int(match.group(1)) if match else None
        raise LedgerParseError(f"malformed row: {e}", row=row, source=source_name) from e
    except pd.errors.EmptyDataError as e:
        raise LedgerParseError("empty input, header row expected", row=1, source=source_name) from e

    lines = _record_lines(text)
    if len(lines) != len(frame):
        logging.debug(f"Line map of {source_name or 'stream'} disagrees with the parsed rows; numbering rows sequentially.")
        lines = list(range(2, len(frame) + 2))
    return frame, lines


def _empty_to_none(value) -> Optional[str]:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    value = str(value).strip()
    return value or None


def parse_loans(source, source_name: str = None) -> List[LoanRecord]:
    """
    Parse a loan ledger into LoanRecords.

    Args:
        source: Path, bytes, or a binary/text stream holding UTF-8 delimited text
            with the LEDGER_COLUMNS header.
        source_name (str): Name used in error messages.

    Returns:
        list: One LoanRecord per data row. An empty amount stays None.

    Raises:
        LedgerParseError: On a bad header or a malformed row. ``row`` is the line
            number in the file (the header is line 1).
    """
    if source_name is None and isinstance(source, (str, os.PathLike)):
        source_name = str(source)
    frame, lines = _read_delimited(source, source_name)

    columns = [c.strip() for c in frame.columns]
    if columns != LEDGER_COLUMNS:
        missing = [c for c in LEDGER_COLUMNS if c not in columns]
        raise LedgerParseError(
            f"header must be exactly {','.join(LEDGER_COLUMNS)}; got {','.join(columns)}",
            row=1, column=missing[0] if missing else None, source=source_name,
        )
    frame.columns = columns

    records = []
    for line, row in zip(lines, frame.itertuples(index=False)):
        values = row._asdict()
        for column in LEDGER_COLUMNS:
            value = values[column]
            if isinstance(value, float) and np.isnan(value):
                raise LedgerParseError("missing field", row=line, column=column, source=source_name)

        period_text = values['period'].strip()
        try:
            period = int(period_text)
        except ValueError:
            raise LedgerParseError(f"period '{period_text}' is not an integer year", row=line, column='period', source=source_name)

        amount_text = values['amount'].strip()
        amount = None
        if amount_text:
            try:
                amount = float(amount_text)
            except ValueError:
                raise LedgerParseError(f"amount '{amount_text}' is not a number", row=line, column='amount', source=source_name)
            if not np.isfinite(amount) or amount < 0:
                raise LedgerParseError(f"amount '{amount_text}' must be a finite value >= 0", row=line, column='amount', source=source_name)

        flag_text = values['special_treatment'].strip().lower()
        if flag_text in _TRUE_FLAGS:
            special = True
        elif flag_text in _FALSE_FLAGS:
            special = False
        else:
            raise LedgerParseError(f"special_treatment '{flag_text}' is not a boolean", row=line, column='special_treatment', source=source_name)

        records.append(LoanRecord(
            period=period,
            lender_id=_empty_to_none(values['lender_id']),
            lender_name=values['lender_name'].strip(),
            lender_type=values['lender_type'].strip(),
            borrower_id=_empty_to_none(values['borrower_id']),
            borrower_name=values['borrower_name'].strip(),
            borrower_industry=values['borrower_industry'].strip(),
            amount=amount,
            currency=values['currency'].strip(),
            special_treatment=special,
        ))
    logging.info(f"Parsed {len(records)} loan records from {source_name or 'stream'}.")
    return records


def parse_alias_table(source, source_name: str = None) -> Dict[str, str]:
    """Read a raw_name -> canonical_name table, resolving alias chains."""
    if source_name is None and isinstance(source, (str, os.PathLike)):
        source_name = str(source)
    frame, lines = _read_delimited(source, source_name, columns=ALIAS_COLUMNS)
    columns = [c.strip() for c in frame.columns]
    if columns != ALIAS_COLUMNS:
        raise LedgerParseError(f"alias table header must be {','.join(ALIAS_COLUMNS)}", row=1, source=source_name)
    frame.columns = columns
    aliases = {}
    for line, raw, canonical in zip(lines, frame['raw_name'], frame['canonical_name']):
        raw, canonical = str(raw).strip(), str(canonical).strip()
        if not raw or not canonical:
            raise LedgerParseError("empty alias entry", row=line, column='raw_name' if not raw else 'canonical_name', source=source_name)
        aliases[raw] = canonical
    return resolve_aliases(aliases)


def resolve_aliases(aliases: Dict[str, str]) -> Dict[str, str]:
    # Follow a -> b -> c chains so canonicalization is idempotent.
    resolved = {}
    for raw in aliases:
        seen = {raw}
        target = aliases[raw]
        while target in aliases and target not in seen:
            seen.add(target)
            target = aliases[target]
        resolved[raw] = target
    return resolved


def _violates(rule, record: LoanRecord, borrowers_with_history: set) -> bool:
    if rule == RULE_MISSING_PARTY:
        return record.lender_id is None or record.borrower_id is None
    if rule == RULE_MISSING_AMOUNT:
        return record.amount is None
    if rule == RULE_SPECIAL_TREATMENT:
        return record.special_treatment
    if rule == RULE_NO_CREDIT_HISTORY:
        return record.borrower_id not in borrowers_with_history
    raise ValueError(f"Unknown exclusion rule {rule}.")


def _borrowers_with_history(records: Iterable[LoanRecord]) -> set:
    return {r.borrower_id for r in records if r.amount is not None and r.amount > 0}


def canonicalize_lenders(records: Sequence[LoanRecord], aliases: Dict[str, str] = None) -> Tuple[List[LoanRecord], int]:
    """
    Map lender names through the alias table and give every canonical name a single
    lender_id (the smallest id seen under that name).

    Returns:
        tuple: (records, number of records whose name or id changed)
    """
    aliases = aliases or {}
    named = [replace(r, lender_name=aliases.get(r.lender_name, r.lender_name)) for r in records]

    canonical_id = {}
    for record in named:
        if not record.lender_name or record.lender_id is None:
            continue
        current = canonical_id.get(record.lender_name)
        if current is None or record.lender_id < current:
            canonical_id[record.lender_name] = record.lender_id

    result, changed = [], 0
    for original, record in zip(records, named):
        if record.lender_name in canonical_id and record.lender_id is not None:
            record = replace(record, lender_id=canonical_id[record.lender_name])
        if record != original:
            changed += 1
        result.append(record)
    return result, changed


def preprocess(
    records: Sequence[LoanRecord],
    aliases: Dict[str, str] = None,
    period_range: Tuple[int, int] = None,
    rule_order: Sequence = DEFAULT_RULE_ORDER,
    require_single_currency: bool = True,
) -> Tuple[List[LoanRecord], ExclusionReport]:
    """
    Apply the exclusion rules and lender-name canonicalization.

    Rules: (1) borrowers without credit history, i.e. no retained record with a
    positive amount; (2) records missing creditor or debtor; (3) records missing
    amount; (4) borrowers under special treatment; (5) lender-name canonicalization.
    Rules 2-4 and 1 run in ``rule_order``; each record is counted under the first
    rule that removes it. Rule 5 rewrites names and ids and removes nothing.

    Raises:
        MixedCurrencyError: If the retained records carry more than one currency label.
    """
    report = ExclusionReport()
    remaining = list(records)

    if period_range is not None:
        start, end = period_range
        kept = [r for r in remaining if start <= r.period <= end]
        report.removed[RULE_PERIOD_WINDOW] = len(remaining) - len(kept)
        remaining = kept

    for rule in rule_order:
        history = _borrowers_with_history(remaining) if rule == RULE_NO_CREDIT_HISTORY else set()
        kept = [r for r in remaining if not _violates(rule, r, history)]
        report.removed[rule] = len(remaining) - len(kept)
        logging.info(f"Exclusion rule {rule}: removed {report.removed[rule]} records.")
        remaining = kept

    # Re-check: a zero-amount record never counts as credit history.
    zero_amount = [r for r in remaining if r.amount is not None and r.amount <= 0]
    if zero_amount:
        remaining = [r for r in remaining if r.amount is None or r.amount > 0]
        report.removed[RULE_NO_CREDIT_HISTORY] = report.removed.get(RULE_NO_CREDIT_HISTORY, 0) + len(zero_amount)

    remaining, report.canonicalized = canonicalize_lenders(remaining, aliases)
    report.removed[RULE_CANONICAL_NAME] = 0
    report.retained = len(remaining)

    if require_single_currency:
        currencies = sorted({r.currency for r in remaining})
        if len(currencies) > 1:
            raise MixedCurrencyError(f"A run requires a single currency; found {', '.join(currencies)}.")

    logging.info(f"Preprocessing retained {report.retained} of {report.raw_count} records.")
    return remaining, report


def slice_periods(records: Sequence[LoanRecord]) -> Dict[int, List[LoanRecord]]:
    slices = {}
    for record in records:
        slices.setdefault(record.period, []).append(record)
    return dict(sorted(slices.items()))


def records_to_frame(records: Sequence[LoanRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(r) for r in records], columns=LEDGER_COLUMNS)
    return frame


def write_ledger(records: Sequence[LoanRecord], path) -> None:
    """Write records in the ledger format read by parse_loans."""
    frame = records_to_frame(records)
    frame['amount'] = [repr(float(r.amount)) if r.amount is not None else '' for r in records]
    frame['special_treatment'] = ['true' if flag else 'false' for flag in frame['special_treatment']]
    frame['lender_id'] = frame['lender_id'].fillna('')
    frame['borrower_id'] = frame['borrower_id'].fillna('')
    frame.to_csv(path, index=False, lineterminator='\n')
    logging.info(f"Ledger with {len(frame)} records written to {path}")


class LedgerManager:
    def __init__(self, alias_path=None, period_range: Tuple[int, int] = None, require_single_currency: bool = True):
        """
        Load and clean loan ledgers.

        Args:
            alias_path: Optional alias table (raw_name, canonical_name).
            period_range (tuple): Inclusive (first, last) analysis window.
            require_single_currency (bool): Reject ledgers mixing currency labels.
        """
        self.aliases = parse_alias_table(alias_path) if alias_path else {}
        self.period_range = period_range
        self.require_single_currency = require_single_currency
        if period_range is not None and period_range[0] > period_range[1]:
            raise ValueError(f"Empty period range {period_range}.")

    def load(self, path) -> Tuple[List[LoanRecord], ExclusionReport]:
        raw = parse_loans(path)
        return preprocess(
            raw,
            aliases=self.aliases,
            period_range=self.period_range,
            require_single_currency=self.require_single_currency,
        )

    def load_periods(self, path) -> Tuple[Dict[int, List[LoanRecord]], ExclusionReport]:
        records, report = self.load(path)
        return slice_periods(records), report
