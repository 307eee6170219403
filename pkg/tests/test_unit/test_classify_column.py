"""Tests for 'classify_column' function."""

import pytest

from lakeunion.lake_model import ColumnKind, classify_column


@pytest.mark.parametrize(
    ('values', 'expected'),
    (
        (['12', '3.5', '7'], ColumnKind.NON_TEXTUAL),
        (['boston', 'dallas', '42'], ColumnKind.TEXTUAL),
        ([], ColumnKind.NON_TEXTUAL),
        (['', '  '], ColumnKind.NON_TEXTUAL),
        (['2021-01-03', '1999/12/31', 'x'], ColumnKind.NON_TEXTUAL),
        (['1,000', '-3', 'a', 'b'], ColumnKind.TEXTUAL),
        (['1,000', '-3', '5e3', 'b'], ColumnKind.NON_TEXTUAL),
        (['boston', '', '', '7'], ColumnKind.TEXTUAL),
    ),
)
def test_classify_column(values, expected):
    assert classify_column(values) is expected
