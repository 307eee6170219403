"""Knowledge base column and relationship semantics."""

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

from lakeunion.errors import BadColumn, NoMappedValues, UnknownType
from lakeunion.kb_store import predicates_of_pair, types_of_value
from lakeunion.lake_model import unique_value_pairs


class Source(enum.Enum):
    KB = 'kb'
    SYNTH = 'synth'


class Context(enum.Enum):
    DATA_LAKE = 'data-lake'
    QUERY = 'query'


class Annotation(NamedTuple):
    id: str
    source: Source
    confidence: float


def _sorted_annotations(source, confidences):
    return tuple(
        Annotation(annotation_id, source, confidence)
        for annotation_id, confidence in sorted(confidences.items())
    )


@dataclass(frozen=True)
class ColumnSemantics:
    column_ref: Tuple[Optional[str], int]
    source: Source
    confidences: Dict[str, float]
    mapped_value_count: int
    context: Context

    @property
    def annotations(self):
        return _sorted_annotations(self.source, self.confidences)

    def __bool__(self):
        return bool(self.confidences)


@dataclass(frozen=True)
class RelationshipSemantics:
    pair_ref: Tuple[Optional[str], int, int]
    source: Source
    confidences: Dict[str, float]

    @property
    def annotations(self):
        return _sorted_annotations(self.source, self.confidences)

    def __bool__(self):
        return bool(self.confidences)


def granularity_score(kb, a):
    """Inverse log penalty of a type by its number of entities.

    Types with less than 10 entities are not penalized, so the result is
    always in ``(0, 1]``.
    """
    count = kb.type_counts.get(a)
    if count is None or count < 1:
        raise UnknownType(f"Type '{a}' has no entities in the knowledge base.")
    return 1 / max(1.0, math.log10(count))


def frequency_score(tally, a, mapped):
    """Fraction of the mapped unique values of a column carrying type ``a``.

    Parameters
    ----------

    tally : dict
      Number of unique values per type.
    a : str
      Type identifier.
    mapped : int
      Number of unique values mapped to the knowledge base.
    """
    if mapped < 1:
        raise NoMappedValues(
            'No value of the column maps to the knowledge base.',
        )
    return tally.get(a, 0) / mapped


def _winning_top_level_type(kb, votes):
    # majority first, then the rarer type, then the smaller identifier
    return min(
        votes,
        key=lambda t: (-votes[t], kb.type_counts.get(t, 0), t),
    )


def compute_column_semantics(kb, col, context, table_id=None):
    """Annotate a textual column with knowledge base types.

    Every unique value votes once for each top level type among its types.
    Only the winning top level type and its descendants are kept, scored
    with ``fs * gs`` for lake columns and ``fs`` for query columns.

    Parameters
    ----------

    kb : lakeunion.kb_store.KbStore
      Knowledge base.
    col : lakeunion.lake_model.ColumnData
      Column to annotate.
    context : Context
      Whether the column belongs to a lake table or to the query table.
    table_id : str
      Identifier of the column's table, only used as a reference.
    """
    if not col.is_textual:
        raise BadColumn(
            f'Column {col.column_index} is not textual, it has no semantics.',
        )

    tally = Counter()
    votes = Counter()
    mapped = 0
    for value in col.unique_values:
        types = types_of_value(kb, value)
        if not types:
            continue
        mapped += 1
        tally.update(types)
        votes.update(t for t in types if t in kb.top_level_types)

    confidences = {}
    if votes:
        winner = _winning_top_level_type(kb, votes)
        for type_id in tally:
            if kb.top_level_of(type_id) != winner:
                continue
            score = frequency_score(tally, type_id, mapped)
            if context is Context.DATA_LAKE:
                score *= granularity_score(kb, type_id)
            confidences[type_id] = score

    return ColumnSemantics(
        column_ref=(table_id, col.column_index),
        source=Source.KB,
        confidences=confidences,
        mapped_value_count=mapped,
        context=context,
    )


def compute_relationship_semantics(kb, table, i, j):
    """Annotate the ordered column pair ``(i, j)`` with its main predicate.

    The confidence of a predicate is the fraction of mapped unique value
    pairs linked by it. Only the best predicate is kept; ties go to the
    predicate with fewer facts, then to the smaller identifier.
    """
    tally = Counter()
    mapped = 0
    for pair in unique_value_pairs(table, i, j):
        predicates = predicates_of_pair(kb, pair)
        if predicates:
            mapped += 1
            tally.update(predicates)

    confidences = {}
    if mapped:
        best = min(
            tally,
            key=lambda p: (-tally[p], kb.predicate_counts.get(p, 0), p),
        )
        confidences[best] = tally[best] / mapped

    return RelationshipSemantics(
        pair_ref=(table.table_id, i, j),
        source=Source.KB,
        confidences=confidences,
    )
