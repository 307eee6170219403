"""Offline preprocessing of a lake into node and edge inverted indexes."""

import contextlib
import itertools
import json
import logging
import os
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Tuple

from tqdm import tqdm

from lakeunion.errors import (
    IndexVersionError,
    LakeIOError,
    TableFormatError,
)
from lakeunion.fd_miner import discover_unary_fds
from lakeunion.kb_semantics import (
    Context,
    Source,
    compute_column_semantics,
    compute_relationship_semantics,
)
from lakeunion.kb_store import KbStore, load_kb
from lakeunion.lake_model import ingest_table, list_lake_tables
from lakeunion.synth_kb import (
    SynthKb,
    build_synth_kb,
    canonical_score,
    lake_column_semantics,
    lake_relationship_semantics,
    rel_dict_to_json,
    synth_kb_from_json,
    type_dict_to_json,
)


logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

NODE_INDEX_FILENAME = 'node_index.json'
EDGE_INDEX_FILENAME = 'edge_index.json'
SYNTH_TYPE_DICT_FILENAME = 'synth_type_dict.json'
SYNTH_REL_DICT_FILENAME = 'synth_rel_dict.json'
META_FILENAME = 'meta.json'
INDEX_FILENAMES = (
    NODE_INDEX_FILENAME,
    EDGE_INDEX_FILENAME,
    SYNTH_TYPE_DICT_FILENAME,
    SYNTH_REL_DICT_FILENAME,
    META_FILENAME,
)

STAGES = (
    'ingestion',
    'kb column semantics',
    'kb relationship semantics',
    'fd discovery',
    'synthesized kb',
    'index assembly',
)


class NodePosting(NamedTuple):
    table_id: str
    column_index: int
    confidence: float


class EdgePosting(NamedTuple):
    table_id: str
    i: int
    j: int
    left_conf: float
    rel_conf: float
    right_conf: float

    @property
    def score(self):
        return self.left_conf * self.rel_conf * self.right_conf


@dataclass(frozen=True)
class SemanticGraph:
    """Annotated columns and column pairs of one table, by source.

    ``columns`` maps a column index to ``{source: {annotation: conf}}`` and
    ``relations`` maps an ordered column pair to the same structure.
    """

    table_id: str
    columns: Dict[int, Dict[Source, Dict[str, float]]]
    relations: Dict[Tuple[int, int], Dict[Source, Dict[str, float]]]

    def column_semantics(self, index, source):
        return self.columns.get(index, {}).get(source, {})

    def relationship_semantics(self, i, j, source):
        return self.relations.get((i, j), {}).get(source, {})

    @classmethod
    def from_postings(cls, table_id, node_postings, edge_postings):
        """Rebuild a graph from the postings an index keeps for a table.

        Parameters
        ----------

        table_id : str
          Table identifier.
        node_postings : iterable
          ``(annotation, source, NodePosting)`` triples.
        edge_postings : iterable
          ``(key, EdgePosting)`` pairs, ``key`` being an edge index key.
        """
        columns = defaultdict(lambda: defaultdict(dict))
        for annotation, source, posting in node_postings:
            columns[posting.column_index][source][annotation] = (
                posting.confidence
            )

        relations = defaultdict(lambda: defaultdict(dict))
        for key, posting in edge_postings:
            source, predicate = edge_key_relationship(key)
            relations[(posting.i, posting.j)][source][predicate] = (
                posting.rel_conf
            )

        return cls(
            table_id=table_id,
            columns=_plain(columns),
            relations=_plain(relations),
        )


def _plain(nested):
    return {
        key: {source: dict(scores) for source, scores in by_source.items()}
        for key, by_source in nested.items()
    }


def annotation_source(annotation):
    """Tell the source of an annotation from its identifier.

    Knowledge base identifiers are lowercased at load, synthesized ones
    start with an uppercase prefix.
    """
    if annotation.startswith(('CS(', 'RS(')):
        return Source.SYNTH
    return Source.KB


def edge_key_relationship(key):
    """Return the source and the relationship annotation of an edge key."""
    if len(key) == 1:
        return Source.SYNTH, key[0]
    return Source.KB, key[1]


def kb_column_semantics(table, kb):
    semantics = {}
    for index in table.textual_columns:
        cs = compute_column_semantics(
            kb, table.column(index), Context.DATA_LAKE, table.table_id,
        )
        semantics[index] = cs
    return semantics


def kb_relationship_semantics(table, kb, column_semantics):
    semantics = {}
    annotated = [i for i, cs in sorted(column_semantics.items()) if cs]
    for i, j in itertools.permutations(annotated, 2):
        rs = compute_relationship_semantics(kb, table, i, j)
        if rs:
            semantics[(i, j)] = rs
    return semantics


def assemble_semantic_graph(
    table,
    synth,
    kb_columns=None,
    kb_relations=None,
):
    """Put the knowledge base and synthesized semantics of a table together.

    The synthesized side comes from ``synth``, which must be a freshly
    built :py:class:`lakeunion.synth_kb.SynthKb`.
    """
    columns = defaultdict(dict)
    relations = defaultdict(dict)
    for index, cs in (kb_columns or {}).items():
        if cs:
            columns[index][Source.KB] = dict(cs.confidences)
    for pair, rs in (kb_relations or {}).items():
        relations[pair][Source.KB] = dict(rs.confidences)

    for index in table.textual_columns:
        cs = lake_column_semantics(synth, table.table_id, index)
        if cs:
            columns[index][Source.SYNTH] = cs.confidences
    for i, j in itertools.permutations(table.textual_columns, 2):
        rs = lake_relationship_semantics(synth, table.table_id, i, j)
        if rs:
            relations[(i, j)][Source.SYNTH] = rs.confidences

    return SemanticGraph(
        table_id=table.table_id,
        columns=dict(columns),
        relations=dict(relations),
    )


def compute_semantic_graph(table, kb, synth, use_kb=True, use_synth=True):
    """Compute the semantic graph of a lake table from scratch."""
    kb_columns = kb_relations = None
    if use_kb:
        kb_columns = kb_column_semantics(table, kb)
        kb_relations = kb_relationship_semantics(table, kb, kb_columns)
    return assemble_semantic_graph(
        table,
        synth if use_synth else SynthKb.empty(),
        kb_columns=kb_columns,
        kb_relations=kb_relations,
    )


def graph_postings(graph):
    """Node and edge postings of a semantic graph.

    For every edge key only the column pair with the largest
    ``left * rel * right`` product is kept, the smaller pair on ties.

    Returns
    -------

    tuple
      ``[(annotation, source, NodePosting)]`` and
      ``{key: EdgePosting}`` for the table of the graph.
    """
    table_id = graph.table_id
    nodes = []
    for index in sorted(graph.columns):
        for source, scores in sorted(
            graph.columns[index].items(), key=lambda item: item[0].value,
        ):
            for annotation, conf in sorted(scores.items()):
                nodes.append(
                    (annotation, source, NodePosting(table_id, index, conf)),
                )

    edges = {}

    def offer(key, posting):
        current = edges.get(key)
        if current is None or (-posting.score, posting.i, posting.j) < (
            -current.score, current.i, current.j,
        ):
            edges[key] = posting

    for (i, j), by_source in sorted(graph.relations.items()):
        for predicate, rel_conf in by_source.get(Source.KB, {}).items():
            lefts = graph.column_semantics(i, Source.KB)
            rights = graph.column_semantics(j, Source.KB)
            for (a1, c1), (a2, c2) in itertools.product(
                lefts.items(), rights.items(),
            ):
                offer(
                    (a1, predicate, a2),
                    EdgePosting(table_id, i, j, c1, rel_conf, c2),
                )
        for sid, rel_conf in by_source.get(Source.SYNTH, {}).items():
            offer((sid,), EdgePosting(table_id, i, j, 1.0, rel_conf, 1.0))

    return nodes, edges


def retained_graph(graph):
    """The graph an index keeps for a table, after edge retention."""
    nodes, edges = graph_postings(graph)
    return SemanticGraph.from_postings(graph.table_id, nodes, edges.items())


@dataclass(frozen=True)
class SearchIndex:
    node_index: Dict[str, List[NodePosting]]
    edge_index: Dict[Tuple[str, ...], List[EdgePosting]]
    synth: SynthKb
    meta: dict
    timings: Dict[str, float] = field(
        default_factory=dict, compare=False, repr=False,
    )
    _graphs: Dict[str, SemanticGraph] = field(
        default_factory=dict, compare=False, repr=False,
    )

    @property
    def table_ids(self):
        return sorted(self.meta.get('tables', {}))

    @property
    def kb_dir(self):
        return self.meta.get('kb_dir')

    def graph(self, table_id):
        """Semantic graph of an indexed table."""
        if not self._graphs:
            self._load_graphs()
        return self._graphs.get(
            table_id, SemanticGraph(table_id, columns={}, relations={}),
        )

    def _load_graphs(self):
        nodes = defaultdict(list)
        for annotation, postings in self.node_index.items():
            source = annotation_source(annotation)
            for posting in postings:
                nodes[posting.table_id].append((annotation, source, posting))
        edges = defaultdict(list)
        for key, postings in self.edge_index.items():
            for posting in postings:
                edges[posting.table_id].append((key, posting))
        for table_id in set(nodes) | set(edges):
            self._graphs[table_id] = SemanticGraph.from_postings(
                table_id, nodes[table_id], edges[table_id],
            )

    def __bool__(self):
        return bool(self.node_index or self.edge_index)


@contextlib.contextmanager
def _stage(timings, name):
    start = time.perf_counter()
    yield
    timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _ingest_lake(lake_dir, quiet):
    tables, skipped = [], []
    paths = list_lake_tables(lake_dir)
    for path in tqdm(paths, desc='Reading tables', disable=quiet):
        try:
            tables.append(ingest_table(path))
        except (TableFormatError, LakeIOError) as exc:
            logger.warning(f'Skipping table: {exc}')
            skipped.append(os.path.splitext(os.path.basename(path))[0])
    return tables, skipped


def _kb_coverage(table, kb_columns):
    total = sum(
        len(table.column(i).unique_values) for i in table.textual_columns
    )
    mapped = sum(cs.mapped_value_count for cs in kb_columns.values())
    return canonical_score(mapped / total) if total else 0.0


def build_index(
    lake_dir,
    kb_dir=None,
    use_kb=True,
    use_synth=True,
    quiet=True,
    use_cache=False,
):
    """Compute the semantics of every lake table and index them.

    Parameters
    ----------

    lake_dir : str
      Directory with the CSV tables of the lake.
    kb_dir : str
      Knowledge base directory. Without it, or when ``use_kb`` is false, an
      empty knowledge base is used and every value is left to the
      synthesized knowledge base.
    use_kb : bool
      Index knowledge base semantics.
    use_synth : bool
      Build the synthesized knowledge base and index its semantics.
    quiet : bool
      Don't display progress bars.
    use_cache : bool
      Reuse the cached parsed knowledge base.
    """
    timings = {}
    if use_kb and kb_dir is not None:
        kb = load_kb(kb_dir, use_cache=use_cache)
    else:
        kb = KbStore.empty()
        use_kb = False

    with _stage(timings, 'ingestion'):
        tables, skipped = _ingest_lake(lake_dir, quiet)

    kb_columns, kb_relations = {}, {}
    if use_kb:
        with _stage(timings, 'kb column semantics'):
            for table in tqdm(tables, desc='Column semantics', disable=quiet):
                kb_columns[table.table_id] = kb_column_semantics(table, kb)
        with _stage(timings, 'kb relationship semantics'):
            for table in tqdm(
                tables, desc='Relationship semantics', disable=quiet,
            ):
                kb_relations[table.table_id] = kb_relationship_semantics(
                    table, kb, kb_columns[table.table_id],
                )

    fds = {}
    synth = SynthKb.empty()
    if use_synth:
        with _stage(timings, 'fd discovery'):
            for table in tqdm(tables, desc='Dependencies', disable=quiet):
                fds[table.table_id] = discover_unary_fds(table)
        with _stage(timings, 'synthesized kb'):
            synth = build_synth_kb(tables, kb, fds)

    node_index = defaultdict(list)
    edge_index = defaultdict(list)
    tables_meta = {}
    with _stage(timings, 'index assembly'):
        for table in tables:
            graph = assemble_semantic_graph(
                table,
                synth,
                kb_columns=kb_columns.get(table.table_id),
                kb_relations=kb_relations.get(table.table_id),
            )
            nodes, edges = graph_postings(graph)
            for annotation, _, posting in nodes:
                node_index[annotation].append(posting)
            for key, posting in edges.items():
                edge_index[key].append(posting)
            tables_meta[table.table_id] = {
                'row_count': table.row_count,
                'column_count': len(table.columns),
                'textual_columns': len(table.textual_columns),
                'kb_coverage': _kb_coverage(
                    table, kb_columns.get(table.table_id, {}),
                ),
                'fd_count': len(fds.get(table.table_id, ())),
            }

    meta = {
        'format_version': FORMAT_VERSION,
        'kb_dir': os.path.abspath(kb_dir) if use_kb else None,
        'options': {'use_kb': use_kb, 'use_synth': use_synth},
        'tables': tables_meta,
        'skipped': sorted(skipped),
    }
    logger.info(
        f'Indexed {len(tables)} tables ({len(skipped)} skipped):'
        f' {len(node_index)} node keys, {len(edge_index)} edge keys',
    )
    return SearchIndex(
        node_index={k: sorted(v) for k, v in sorted(node_index.items())},
        edge_index={k: sorted(v) for k, v in sorted(edge_index.items())},
        synth=synth,
        meta=meta,
        timings=timings,
    )


def _dump_json(data, filepath):
    with open(filepath, 'w', encoding='utf-8') as f:
        json.dump(data, f, sort_keys=True, indent=1, ensure_ascii=False)
        f.write('\n')


def save_index(idx, index_dir):
    """Write an index to a directory, creating it if needed."""
    try:
        os.makedirs(index_dir, exist_ok=True)
        _dump_json(
            {
                annotation: [list(posting) for posting in postings]
                for annotation, postings in idx.node_index.items()
            },
            os.path.join(index_dir, NODE_INDEX_FILENAME),
        )
        _dump_json(
            [
                [list(key), [list(posting) for posting in postings]]
                for key, postings in sorted(idx.edge_index.items())
            ],
            os.path.join(index_dir, EDGE_INDEX_FILENAME),
        )
        _dump_json(
            type_dict_to_json(idx.synth),
            os.path.join(index_dir, SYNTH_TYPE_DICT_FILENAME),
        )
        _dump_json(
            rel_dict_to_json(idx.synth),
            os.path.join(index_dir, SYNTH_REL_DICT_FILENAME),
        )
        _dump_json(idx.meta, os.path.join(index_dir, META_FILENAME))
    except OSError as exc:
        raise LakeIOError(
            f"The index can't be written to '{index_dir}': {exc}",
        ) from None


def _load_json(index_dir, filename):
    filepath = os.path.join(index_dir, filename)
    try:
        with open(filepath, encoding='utf-8') as f:
            return json.load(f)
    except OSError as exc:
        raise LakeIOError(f"'{filepath}' can't be read: {exc}") from None
    except ValueError as exc:
        raise LakeIOError(f"'{filepath}' is not valid JSON: {exc}") from None


def load_index(index_dir):
    """Read an index written by :py:func:`save_index`."""
    if not os.path.isdir(index_dir):
        raise LakeIOError(f"The index directory '{index_dir}' doesn't exist.")

    meta = _load_json(index_dir, META_FILENAME)
    version = meta.get('format_version')
    if version != FORMAT_VERSION:
        raise IndexVersionError(
            f"The index at '{index_dir}' has format version {version!r},"
            f' expected {FORMAT_VERSION}. Rebuild it with'
            " 'lakeunion index'.",
        )

    try:
        node_index = {
            annotation: [NodePosting(*posting) for posting in postings]
            for annotation, postings in _load_json(
                index_dir, NODE_INDEX_FILENAME,
            ).items()
        }
        edge_index = {
            tuple(key): [EdgePosting(*posting) for posting in postings]
            for key, postings in _load_json(index_dir, EDGE_INDEX_FILENAME)
        }
        synth = synth_kb_from_json(
            _load_json(index_dir, SYNTH_TYPE_DICT_FILENAME),
            _load_json(index_dir, SYNTH_REL_DICT_FILENAME),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise LakeIOError(
            f"The index at '{index_dir}' is corrupt: {exc}",
        ) from None

    return SearchIndex(
        node_index=node_index,
        edge_index=edge_index,
        synth=synth,
        meta=meta,
    )
