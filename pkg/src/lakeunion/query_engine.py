"""Query semantic trees, edge scoring and top-k table union search."""

import enum
import functools
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Tuple

from lakeunion.errors import (
    EmptyIntentSemantics,
    IntentNotTextual,
    UnknownIntent,
)
from lakeunion.index_builder import (
    SemanticGraph,
    compute_semantic_graph,
    retained_graph,
)
from lakeunion.kb_semantics import (
    Context,
    Source,
    compute_column_semantics,
    compute_relationship_semantics,
    granularity_score,
)
from lakeunion.synth_kb import (
    format_score,
    synth_column_semantics,
    synth_relationship_semantics,
)


logger = logging.getLogger(__name__)

RESULTS_HEADER = (
    'rank',
    'table_id',
    'score',
    'root_column',
    'matched_edge_count',
)


class QueryMode(enum.Enum):
    FULL = 'full'
    KB_ONLY = 'kb'
    SYNTH_ONLY = 'synth'

    @property
    def sources(self):
        if self is QueryMode.KB_ONLY:
            return (Source.KB,)
        if self is QueryMode.SYNTH_ONLY:
            return (Source.SYNTH,)
        return (Source.KB, Source.SYNTH)


class EdgeView(NamedTuple):
    """Semantics of an ordered column pair seen from one of its ends.

    Every field maps a source to ``{annotation: confidence}``.
    """

    left: dict
    right: dict
    forward: dict
    backward: dict


def edge_view(graph, i, j):
    return EdgeView(
        left=graph.columns.get(i, {}),
        right=graph.columns.get(j, {}),
        forward=graph.relations.get((i, j), {}),
        backward=graph.relations.get((j, i), {}),
    )


@dataclass(frozen=True)
class QuerySemanticTree:
    """Tree over the query columns rooted at the intent column.

    ``edges`` are ``(parent, child)`` column pairs in breadth first order.
    """

    table_id: str
    root: int
    graph: SemanticGraph
    edges: Tuple[Tuple[int, int], ...]
    granularity: Callable[[str], float] = field(compare=False, repr=False)

    def view(self, parent, child):
        return edge_view(self.graph, parent, child)

    @property
    def intent_semantics(self):
        return self.graph.columns.get(self.root, {})


class PairMatch(NamedTuple):
    score: float
    source: Optional[Source]
    kb_score: float
    synth_score: float
    annotations: Tuple[str, ...] = ()


class MatchedEdge(NamedTuple):
    query_pair: Tuple[int, int]
    table_pair: Tuple[int, int]
    source: Source
    annotations: Tuple[str, ...]
    score: float


class RankedResult(NamedTuple):
    table_id: str
    score: float
    root_column: int
    matched_edges: Tuple[MatchedEdge, ...]


def _has_relation(graph, i, j):
    for pair in ((i, j), (j, i)):
        if any(graph.relations.get(pair, {}).values()):
            return True
    return False


def build_query_tree(q, intent, kb, synth):
    """Annotate the query table and grow its semantic tree from the intent.

    Parameters
    ----------

    q : lakeunion.lake_model.LakeTable
      Query table.
    intent : int
      Index of the intent column.
    kb : lakeunion.kb_store.KbStore
      External knowledge base.
    synth : lakeunion.synth_kb.SynthKb
      Synthesized knowledge base of the searched lake.
    """
    if not q.column(intent).is_textual:
        raise IntentNotTextual(
            f"The intent column {intent} of '{q.table_id}' is not textual.",
        )

    columns = {}
    for index in q.textual_columns:
        by_source = {}
        kb_cs = compute_column_semantics(
            kb, q.column(index), Context.QUERY, q.table_id,
        )
        if kb_cs:
            by_source[Source.KB] = dict(kb_cs.confidences)
        synth_cs = synth_column_semantics(synth, q.column(index), q.table_id)
        if synth_cs:
            by_source[Source.SYNTH] = synth_cs.confidences
        columns[index] = by_source

    if not columns[intent]:
        raise EmptyIntentSemantics(
            f"The intent column {intent} ('{q.column(intent).header}') of"
            f" '{q.table_id}' maps neither to the knowledge base nor to the"
            ' synthesized knowledge base.',
        )

    relations = {}
    for i, j in itertools.permutations(q.textual_columns, 2):
        by_source = {}
        if Source.KB in columns[i] and Source.KB in columns[j]:
            kb_rs = compute_relationship_semantics(kb, q, i, j)
            if kb_rs:
                by_source[Source.KB] = dict(kb_rs.confidences)
        synth_rs = synth_relationship_semantics(synth, q, i, j)
        if synth_rs:
            by_source[Source.SYNTH] = synth_rs.confidences
        if by_source:
            relations[(i, j)] = by_source

    graph = SemanticGraph(
        table_id=q.table_id,
        columns={i: cs for i, cs in columns.items() if cs},
        relations=relations,
    )

    edges = []
    visited = {intent}
    queue = deque([intent])
    while queue:
        parent = queue.popleft()
        for child in q.textual_columns:
            if child in visited or not _has_relation(graph, parent, child):
                continue
            visited.add(child)
            edges.append((parent, child))
            queue.append(child)

    logger.debug(f'Query tree of {q.table_id} from {intent}: {edges}')
    return QuerySemanticTree(
        table_id=q.table_id,
        root=intent,
        graph=graph,
        edges=tuple(edges),
        granularity=functools.partial(granularity_score, kb),
    )


def resolve_intent(q, intent):
    """Find the intent column of a query table by header or 0-based index.

    Headers take precedence over indexes.
    """
    if isinstance(intent, int):
        position = intent
    else:
        column = q.column_by_header(intent)
        if column is not None:
            return column.column_index
        if not intent.strip().isdigit():
            raise UnknownIntent(
                f"'{q.table_id}' has no column named '{intent}'.",
            )
        position = int(intent)
    if not 0 <= position < len(q.columns):
        raise UnknownIntent(
            f"'{q.table_id}' has no column {position}, it has"
            f' {len(q.columns)} columns.',
        )
    return position


def col_match(qc, tc):
    """Best product of confidences over the annotations shared by two
    columns.

    Parameters
    ----------

    qc : dict
      Query column ``{annotation: confidence}``.
    tc : dict
      Table column ``{annotation: confidence}``, same source as ``qc``.

    Returns
    -------

    tuple
      Score and winning annotation (``None`` if nothing is shared).
    """
    best, winner = 0.0, None
    for annotation in sorted(qc.keys() & tc.keys()):
        score = qc[annotation] * tc[annotation]
        if score > best:
            best, winner = score, annotation
    return best, winner


def rel_match(q_edge, t_edge, source):
    """Best product of relationship confidences between two column pairs.

    Both orientations of the query pair are tried against both
    orientations of the table pair.
    """
    best, winner = 0.0, None
    for q_rel, t_rel in itertools.product(
        (q_edge.forward, q_edge.backward),
        (t_edge.forward, t_edge.backward),
    ):
        score, annotation = col_match(
            q_rel.get(source, {}), t_rel.get(source, {}),
        )
        if score > best:
            best, winner = score, annotation
    return best, winner


def _source_match(q_edge, t_edge, source):
    left, a1 = col_match(
        q_edge.left.get(source, {}), t_edge.left.get(source, {}),
    )
    if not left:
        return 0.0, ()
    right, a2 = col_match(
        q_edge.right.get(source, {}), t_edge.right.get(source, {}),
    )
    if not right:
        return 0.0, ()
    rel, predicate = rel_match(q_edge, t_edge, source)
    if not rel:
        return 0.0, ()
    return left * rel * right, (a1, predicate, a2)


def pair_match(q_edge, t_edge, granularity, mode=QueryMode.FULL):
    """Score a query edge against a table column pair.

    Both sources are scored separately. The knowledge base side wins when,
    ignoring the granularity of its two column annotations, it scores at
    least as much as the synthesized side; the score returned is the one of
    the winning side as is.

    Parameters
    ----------

    q_edge : EdgeView
      Query column pair.
    t_edge : EdgeView
      Table column pair.
    granularity : callable
      Granularity score of a knowledge base type.
    mode : QueryMode
      Sources allowed to match.
    """
    kb_score, kb_annotations = 0.0, ()
    if Source.KB in mode.sources:
        kb_score, kb_annotations = _source_match(q_edge, t_edge, Source.KB)
    synth_score, synth_annotations = 0.0, ()
    if Source.SYNTH in mode.sources:
        synth_score, synth_annotations = _source_match(
            q_edge, t_edge, Source.SYNTH,
        )

    if kb_score > 0:
        a1, _, a2 = kb_annotations
        ungrained = kb_score / (granularity(a1) * granularity(a2))
        if ungrained >= synth_score:
            return PairMatch(
                kb_score, Source.KB, kb_score, synth_score, kb_annotations,
            )
    if synth_score > 0:
        return PairMatch(
            synth_score,
            Source.SYNTH,
            kb_score,
            synth_score,
            synth_annotations,
        )
    return PairMatch(0.0, None, kb_score, synth_score)


def _root_columns(tree, graph, mode):
    intent = tree.intent_semantics
    roots = []
    for index in sorted(graph.columns):
        for source in mode.sources:
            score, _ = col_match(
                intent.get(source, {}), graph.columns[index].get(source, {}),
            )
            if score > 0:
                roots.append(index)
                break
    return roots


def _match_from_root(tree, graph, root, mode):
    assignment = {tree.root: root}
    used = {root}
    matched = []
    score = 0.0
    for parent, child in tree.edges:
        if parent not in assignment:
            continue
        t_parent = assignment[parent]
        q_edge = tree.view(parent, child)
        best, best_child = None, None
        for t_child in sorted(graph.columns):
            if t_child in used:
                continue
            match = pair_match(
                q_edge,
                edge_view(graph, t_parent, t_child),
                tree.granularity,
                mode,
            )
            if match.score > 0 and (best is None or match.score > best.score):
                best, best_child = match, t_child
        if best is None:
            continue
        assignment[child] = best_child
        used.add(best_child)
        matched.append(
            MatchedEdge(
                query_pair=(parent, child),
                table_pair=(t_parent, best_child),
                source=best.source,
                annotations=best.annotations,
                score=best.score,
            ),
        )
        score += best.score
    return score, tuple(matched)


def score_table(tree, graph, mode=QueryMode.FULL):
    """Unionability score of a table: its best rooted match of the tree.

    Returns ``None`` when no column of the table matches the intent column
    or no query edge is matched.
    """
    best = None
    for root in _root_columns(tree, graph, mode):
        score, matched = _match_from_root(tree, graph, root, mode)
        if score > 0 and (best is None or score > best.score):
            best = RankedResult(graph.table_id, score, root, matched)
    return best


def _rank(results, k):
    results = sorted(results, key=lambda r: (-r.score, r.table_id))
    return results[:k]


def _check_k(k):
    if k < 1:
        raise ValueError(f'k must be a positive integer, got {k}.')


def _edge_keys(tree, mode):
    keys = set()
    for parent, child in tree.edges:
        for x, y in ((parent, child), (child, parent)):
            left = tree.graph.columns.get(x, {})
            right = tree.graph.columns.get(y, {})
            relations = tree.graph.relations.get((x, y), {})
            if Source.KB in mode.sources:
                for a1, p, a2 in itertools.product(
                    left.get(Source.KB, {}),
                    relations.get(Source.KB, {}),
                    right.get(Source.KB, {}),
                ):
                    keys.add((a1, p, a2))
                    keys.add((a2, p, a1))
            if Source.SYNTH in mode.sources:
                for sid in relations.get(Source.SYNTH, {}):
                    keys.add((sid,))
    return keys


def candidate_tables(idx, tree, mode=QueryMode.FULL):
    """Tables with an edge posting under a key of the query tree."""
    tables = set()
    for key in _edge_keys(tree, mode):
        for posting in idx.edge_index.get(key, ()):
            tables.add(posting.table_id)
    return tables


def search_top_k(idx, tree, k, mode=QueryMode.FULL):
    """Top-k tables of an index unionable with a query.

    Parameters
    ----------

    idx : lakeunion.index_builder.SearchIndex
      Index of the lake.
    tree : QuerySemanticTree
      Semantic tree of the query table.
    k : int
      Maximum number of results.
    mode : QueryMode
      Semantics sources used.
    """
    _check_k(k)
    if not idx:
        return []
    candidates = candidate_tables(idx, tree, mode)
    logger.info(f'{len(candidates)} candidate tables for {tree.table_id}')

    results = []
    for table_id in sorted(candidates):
        result = score_table(tree, idx.graph(table_id), mode)
        if result is not None:
            results.append(result)
    return _rank(results, k)


def scan_top_k(tables, kb, synth, tree, k, mode=QueryMode.FULL):
    """Top-k tables computing the semantics of every table on the fly.

    ``synth`` must be the freshly built synthesized knowledge base of
    ``tables``.
    """
    _check_k(k)
    results = []
    for table in tables:
        graph = retained_graph(compute_semantic_graph(table, kb, synth))
        result = score_table(tree, graph, mode)
        if result is not None:
            results.append(result)
    return _rank(results, k)


def format_results(results):
    """Render a ranking as TSV with a header row."""
    lines = ['\t'.join(RESULTS_HEADER)]
    for rank, result in enumerate(results, start=1):
        lines.append(
            f'{rank}\t{result.table_id}\t{format_score(result.score)}'
            f'\t{result.root_column}\t{len(result.matched_edges)}',
        )
    return '\n'.join(lines) + '\n'


def format_explanation(results):
    """Render the matched edges of a ranking, one per line."""
    lines = []
    for result in results:
        for edge in result.matched_edges:
            lines.append(
                f'{result.table_id}'
                f'\tquery {edge.query_pair[0]}-{edge.query_pair[1]}'
                f'\ttable {edge.table_pair[0]}-{edge.table_pair[1]}'
                f'\t{edge.source.value}'
                f"\t{' '.join(edge.annotations)}"
                f'\t{format_score(edge.score)}',
            )
    return '\n'.join(lines) + '\n' if lines else ''
