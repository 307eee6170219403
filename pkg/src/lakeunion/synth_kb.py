"""Synthesized knowledge base mined from the lake itself.

Every textual column is a synthesized type and every column pair with a
unary functional dependency is a synthesized relationship. Values (and
value pairs) that the external knowledge base doesn't know are scored
against every synthesized type (relationship) overlapping the column
(pair) they come from.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet

from lakeunion.kb_semantics import (
    ColumnSemantics,
    Context,
    RelationshipSemantics,
    Source,
)
from lakeunion.kb_store import predicates_of_pair, types_of_value
from lakeunion.lake_model import ValuePair, unique_value_pairs


logger = logging.getLogger(__name__)


def column_synth_id(table_id, column_index):
    return f'CS({table_id}#{column_index})'


def pair_synth_id(table_id, i, j):
    return f'RS({table_id}#{i},{j})'


def canonical_score(score):
    """Round a score to 12 significant digits."""
    return float(f'{score:.12g}')


def format_score(score):
    return f'{score:.12g}'


@dataclass(frozen=True)
class SynthKb:
    """Synthesized type and relationship dictionaries.

    ``members`` maps every registered identifier to the values (value
    pairs) of its column (pair) unknown to the knowledge base, and
    ``column_scores`` / ``pair_scores`` keep the overlap scores of every
    registered column (pair). They are only available on a freshly built
    knowledge base, persisted indexes keep the dictionaries alone.
    """

    type_dict: Dict[str, Dict[str, float]]
    rel_dict: Dict[ValuePair, Dict[str, float]]
    members: Dict[str, FrozenSet] = field(
        default_factory=dict, compare=False, repr=False,
    )
    column_scores: Dict[str, Dict[str, float]] = field(
        default_factory=dict, compare=False, repr=False,
    )
    pair_scores: Dict[str, Dict[str, float]] = field(
        default_factory=dict, compare=False, repr=False,
    )

    @classmethod
    def empty(cls):
        return cls(type_dict={}, rel_dict={})

    def __bool__(self):
        return bool(self.type_dict or self.rel_dict)


def _overlap_scores(members):
    """Score every registered set against the sets sharing elements with it.

    Returns the host score maps ``{host: {other: |host & other| / |host|}}``
    and the dictionary ``{element: {other: score}}`` keeping, for elements
    of several hosts, the largest score.
    """
    lookup = defaultdict(set)
    for sid, elements in members.items():
        for element in elements:
            lookup[element].add(sid)

    host_scores = {}
    dictionary = defaultdict(dict)
    for host in sorted(members):
        elements = members[host]
        shared = defaultdict(int)
        for element in elements:
            for other in lookup[element]:
                shared[other] += 1
        scores = {
            other: canonical_score(count / len(elements))
            for other, count in shared.items()
        }
        host_scores[host] = scores
        for element in elements:
            entry = dictionary[element]
            for other, score in scores.items():
                if score > entry.get(other, 0):
                    entry[other] = score
    return host_scores, dict(dictionary)


def build_synth_kb(lake, kb, fds):
    """Build the synthesized knowledge base of a lake.

    Parameters
    ----------

    lake : list
      Ingested :py:class:`lakeunion.lake_model.LakeTable` objects.
    kb : lakeunion.kb_store.KbStore
      External knowledge base; values and value pairs it maps are left out.
    fds : dict
      Discovered :py:class:`lakeunion.fd_miner.UnaryFd` sets by table id.
    """
    column_members = {}
    pair_members = {}
    for table in lake:
        for index in table.textual_columns:
            values = frozenset(
                v for v in table.column(index).unique_values
                if not types_of_value(kb, v)
            )
            if values:
                column_members[column_synth_id(table.table_id, index)] = values
        for fd in sorted(fds.get(table.table_id, ())):
            pairs = frozenset(
                p for p in unique_value_pairs(
                    table, fd.determinant, fd.dependent,
                )
                if not predicates_of_pair(kb, p)
            )
            if pairs:
                sid = pair_synth_id(
                    table.table_id, fd.determinant, fd.dependent,
                )
                pair_members[sid] = pairs

    column_scores, type_dict = _overlap_scores(column_members)
    pair_scores, rel_dict = _overlap_scores(pair_members)
    logger.info(
        f'Synthesized {len(column_members)} types over {len(type_dict)}'
        f' values and {len(pair_members)} relationships over'
        f' {len(rel_dict)} value pairs',
    )
    return SynthKb(
        type_dict=type_dict,
        rel_dict=rel_dict,
        members={**column_members, **pair_members},
        column_scores=column_scores,
        pair_scores=pair_scores,
    )


def synth_types_of_value(s, v):
    return dict(s.type_dict.get(v, {}))


def synth_predicates_of_pair(s, p):
    return dict(s.rel_dict.get(p, {}))


def _fold(lookups):
    """Coverage weighted mean of the dictionary scores of some elements."""
    totals = defaultdict(float)
    found = 0
    for scores in lookups:
        if not scores:
            continue
        found += 1
        for sid, score in scores.items():
            totals[sid] += score
    return {sid: total / found for sid, total in totals.items()}, found


def synth_column_semantics(s, col, table_id=None):
    """Synthesized semantics of a query column."""
    confidences, found = _fold(
        s.type_dict.get(v) for v in sorted(col.unique_values)
    )
    return ColumnSemantics(
        column_ref=(table_id, col.column_index),
        source=Source.SYNTH,
        confidences=confidences,
        mapped_value_count=found,
        context=Context.QUERY,
    )


def synth_relationship_semantics(s, table, i, j):
    """Synthesized semantics of an ordered query column pair."""
    confidences, _ = _fold(
        s.rel_dict.get(p) for p in sorted(unique_value_pairs(table, i, j))
    )
    return RelationshipSemantics(
        pair_ref=(table.table_id, i, j),
        source=Source.SYNTH,
        confidences=confidences,
    )


def lake_column_semantics(s, table_id, column_index):
    """Synthesized semantics of a lake column: its overlap score map."""
    sid = column_synth_id(table_id, column_index)
    return ColumnSemantics(
        column_ref=(table_id, column_index),
        source=Source.SYNTH,
        confidences=dict(s.column_scores.get(sid, {})),
        mapped_value_count=len(s.members.get(sid, ())),
        context=Context.DATA_LAKE,
    )


def lake_relationship_semantics(s, table_id, i, j):
    sid = pair_synth_id(table_id, i, j)
    return RelationshipSemantics(
        pair_ref=(table_id, i, j),
        source=Source.SYNTH,
        confidences=dict(s.pair_scores.get(sid, {})),
    )


def _scores_to_json(scores):
    return {sid: format_score(score) for sid, score in sorted(scores.items())}


def _scores_from_json(scores):
    return {sid: float(score) for sid, score in scores.items()}


def type_dict_to_json(s):
    return {
        value: _scores_to_json(scores)
        for value, scores in sorted(s.type_dict.items())
    }


def rel_dict_to_json(s):
    return [
        [pair.left, pair.right, _scores_to_json(scores)]
        for pair, scores in sorted(s.rel_dict.items())
    ]


def synth_kb_from_json(type_data, rel_data):
    return SynthKb(
        type_dict={
            value: _scores_from_json(scores)
            for value, scores in type_data.items()
        },
        rel_dict={
            ValuePair(left, right): _scores_from_json(scores)
            for left, right, scores in rel_data
        },
    )
