"""Exact unary functional dependencies between textual columns."""

import itertools
from typing import NamedTuple

import numpy as np
import pandas as pd


class UnaryFd(NamedTuple):
    table_id: str
    determinant: int
    dependent: int


def _codes(series):
    codes, _ = pd.factorize(series, sort=True)
    return codes.astype(np.int64)


def holds(determinant_codes, dependent_codes, mask):
    """Check a unary dependency over the rows selected by ``mask``.

    The dependency holds when every determinant value is paired with a
    single dependent value.
    """
    left = determinant_codes[mask]
    if left.size == 0:
        return True
    right = dependent_codes[mask]
    pairs = np.unique(np.stack((left, right), axis=1), axis=0)
    return len(pairs) == len(np.unique(left))


def discover_unary_fds(table):
    """Discover the unary dependencies ``i -> j`` of a table.

    Every ordered pair of textual columns is checked by partitioning the
    rows by the determinant value. Rows with an empty cell in either
    column are left out of that pair.
    """
    columns = table.textual_columns
    codes = {i: _codes(table.rows[i]) for i in columns}
    filled = {i: (table.rows[i] != '').to_numpy() for i in columns}

    fds = set()
    for i, j in itertools.permutations(columns, 2):
        if holds(codes[i], codes[j], filled[i] & filled[j]):
            fds.add(UnaryFd(table.table_id, i, j))
    return frozenset(fds)
