"""Data lake tables: CSV ingestion, value normalization and column typing."""

import csv
import enum
import glob
import os
import re
from dataclasses import dataclass, field
from typing import FrozenSet, NamedTuple, Tuple

import pandas as pd

from lakeunion.errors import BadColumn, LakeIOError, TableFormatError


PUNCTUATION_RE = re.compile(r'[.,;:!?"\'()\[\]{}]')
WHITESPACE_RE = re.compile(r'\s+')
DATE_RE = (
    r'^\d{1,4}([-/.])\d{1,2}\1\d{1,4}'
    r'(?:[ t]\d{1,2}:\d{2}(?::\d{2}(?:\.\d+)?)?)?$'
)

# minimum fraction of non-numeric cells of a textual column
TEXTUAL_THRESHOLD = 0.5


class ColumnKind(enum.Enum):
    TEXTUAL = 'textual'
    NON_TEXTUAL = 'non-textual'


class ValuePair(NamedTuple):
    left: str
    right: str

    def reversed(self):
        return ValuePair(self.right, self.left)


@dataclass(frozen=True)
class ColumnData:
    column_index: int
    header: str
    kind: ColumnKind
    unique_values: FrozenSet[str]
    raw_cardinality: int

    @property
    def is_textual(self):
        return self.kind is ColumnKind.TEXTUAL


@dataclass(frozen=True)
class LakeTable:
    """A normalized table of the lake.

    ``rows`` holds the normalized cells, one column per position, with the
    empty string for empty cells.
    """

    table_id: str
    columns: Tuple[ColumnData, ...]
    row_count: int
    rows: pd.DataFrame = field(compare=False, repr=False)

    @property
    def textual_columns(self):
        return tuple(c.column_index for c in self.columns if c.is_textual)

    def column(self, index):
        if not 0 <= index < len(self.columns):
            raise BadColumn(
                f"Column {index} out of range in table '{self.table_id}'"
                f' with {len(self.columns)} columns.',
            )
        return self.columns[index]

    def column_by_header(self, header):
        """Find a column by header, exact match first, then normalized."""
        for column in self.columns:
            if column.header == header:
                return column
        wanted = normalize_value(header)
        for column in self.columns:
            if normalize_value(column.header) == wanted:
                return column
        return None


def normalize_value(raw):
    """Normalize a cell value.

    Lowercases, removes sentence punctuation (hyphens are kept), collapses
    whitespace runs and trims. Idempotent.
    """
    value = PUNCTUATION_RE.sub('', raw.lower())
    return WHITESPACE_RE.sub(' ', value).strip()


def classify_column(values):
    """Decide whether a column is textual.

    A column is textual when at least half of its non-empty cells are
    neither numbers nor dates.
    """
    cells = pd.Series([v.strip() for v in values if v and v.strip()],
                      dtype=object)
    if cells.empty:
        return ColumnKind.NON_TEXTUAL

    numeric = pd.to_numeric(
        cells.str.replace(',', '', regex=False),
        errors='coerce',
    ).notna()
    dates = cells.str.match(DATE_RE, case=False)
    textual_fraction = 1 - float((numeric | dates).mean())
    if textual_fraction >= TEXTUAL_THRESHOLD:
        return ColumnKind.TEXTUAL
    return ColumnKind.NON_TEXTUAL


def _read_csv(path):
    try:
        with open(path, encoding='utf-8', newline='') as f:
            records = [record for record in csv.reader(f) if record]
    except csv.Error as exc:
        raise TableFormatError(f"'{path}' is not valid CSV: {exc}") from None
    except UnicodeDecodeError as exc:
        raise TableFormatError(f"'{path}' is not UTF-8: {exc}") from None
    except OSError as exc:
        raise LakeIOError(f"'{path}' can't be read: {exc}") from None

    if not records:
        raise TableFormatError(f"'{path}' has no columns.")
    width = len(records[0])
    for number, record in enumerate(records[1:], start=1):
        if len(record) != width:
            raise TableFormatError(
                f"'{path}' has ragged rows: row {number} has"
                f' {len(record)} fields but the header has {width}.',
            )
    return pd.DataFrame(records, dtype=object)


def ingest_table(path):
    """Read a CSV file with a header row into a normalized table.

    Parameters
    ----------

    path : str
      Path to the CSV file. The file stem is the table identifier.
    """
    raw = _read_csv(path)

    headers = [str(h) for h in raw.iloc[0]]
    data = raw.iloc[1:].reset_index(drop=True)
    rows = pd.DataFrame(
        {i: data[i].map(normalize_value) for i in data.columns},
        columns=data.columns,
        dtype=object,
    )

    columns = []
    for i, header in enumerate(headers):
        normalized = [v for v in rows[i] if v]
        columns.append(
            ColumnData(
                column_index=i,
                header=header,
                kind=classify_column(data[i].tolist()),
                unique_values=frozenset(normalized),
                raw_cardinality=len(normalized),
            ),
        )

    return LakeTable(
        table_id=os.path.splitext(os.path.basename(path))[0],
        columns=tuple(columns),
        row_count=len(rows),
        rows=rows,
    )


def list_lake_tables(lake_dir):
    """Return the sorted paths of the CSV files of a lake directory."""
    if not os.path.isdir(lake_dir):
        raise LakeIOError(f"The lake directory '{lake_dir}' doesn't exist.")
    return sorted(glob.glob(os.path.join(lake_dir, '*.csv')))


def _textual_column(table, index):
    column = table.column(index)
    if not column.is_textual:
        raise BadColumn(
            f"Column {index} of table '{table.table_id}' is not textual.",
        )
    return column


def unique_value_pairs(table, i, j):
    """Unique ordered value pairs of two textual columns.

    Rows with an empty cell on either side are ignored.
    """
    if i == j:
        raise BadColumn(f'A column pair needs two columns, got ({i}, {j}).')
    _textual_column(table, i)
    _textual_column(table, j)

    left, right = table.rows[i], table.rows[j]
    mask = (left != '') & (right != '')
    return frozenset(
        ValuePair(a, b) for a, b in zip(left[mask], right[mask])
    )
