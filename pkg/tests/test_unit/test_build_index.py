"""Tests for 'build_index' function."""

import random

import pytest
from testing_helpers import FILMS_LAKE_DIR, KB_DIR, PARKS_LAKE_DIR, write_csv

from lakeunion.fd_miner import discover_unary_fds
from lakeunion.index_builder import (
    STAGES,
    EdgePosting,
    SemanticGraph,
    annotation_source,
    build_index,
    graph_postings,
)
from lakeunion.kb_semantics import (
    Context,
    Source,
    compute_column_semantics,
    compute_relationship_semantics,
)
from lakeunion.kb_store import KbStore, load_kb
from lakeunion.lake_model import ingest_table, list_lake_tables
from lakeunion.synth_kb import (
    build_synth_kb,
    lake_column_semantics,
    lake_relationship_semantics,
)


@pytest.fixture(scope='module')
def parks_index():
    return build_index(PARKS_LAKE_DIR, KB_DIR)


def test_build_index_kb_edge(parks_index):
    postings = parks_index.edge_index[('person', 'birthplace', 'city')]
    assert [p.table_id for p in postings] == ['famous_people']
    posting = postings[0]
    assert (posting.i, posting.j) == (0, 1)
    assert posting.rel_conf == 1.0
    assert posting.left_conf == pytest.approx(0.1438, abs=5e-4)
    assert posting.right_conf == pytest.approx(0.6 * 0.2163, abs=5e-4)

    located = parks_index.edge_index[('park', 'located_in', 'city')]
    assert [(p.table_id, p.i, p.j) for p in located] == [
        ('park_films', 0, 3),
    ]


def test_build_index_nodes(parks_index):
    park = parks_index.node_index['park']
    assert [(p.table_id, p.column_index) for p in park] == [
        ('park_films', 0),
    ]
    assert park[0].confidence == pytest.approx(0.2325, abs=5e-4)
    # film titles are unknown to the knowledge base
    assert 'CS(park_films#1)' in parks_index.node_index
    assert 'CS(famous_people#0)' not in parks_index.node_index


def test_build_index_meta(parks_index):
    meta = parks_index.meta
    assert parks_index.table_ids == ['famous_people', 'park_films']
    assert meta['options'] == {'use_kb': True, 'use_synth': True}
    assert meta['skipped'] == []
    famous_people = meta['tables']['famous_people']
    assert famous_people == {
        'row_count': 5,
        'column_count': 3,
        'textual_columns': 3,
        'kb_coverage': 1.0,
        'fd_count': 4,
    }
    assert set(parks_index.timings) == set(STAGES)


def test_build_index_graph(parks_index):
    graph = parks_index.graph('famous_people')
    assert graph.relationship_semantics(0, 1, Source.KB) == {
        'birthplace': 1.0,
    }
    assert set(graph.column_semantics(1, Source.KB)) == {
        'place', 'administrative_area', 'city', 'state',
    }
    assert graph.column_semantics(1, Source.SYNTH) == {}
    assert parks_index.graph('missing').columns == {}


def test_build_index_no_synth():
    idx = build_index(PARKS_LAKE_DIR, KB_DIR, use_synth=False)
    assert not idx.synth
    assert all(
        annotation_source(annotation) is Source.KB
        for annotation in idx.node_index
    )
    assert all(len(key) == 3 for key in idx.edge_index)
    assert idx.meta['options'] == {'use_kb': True, 'use_synth': False}
    assert 'fd discovery' not in idx.timings


@pytest.mark.parametrize('kb_dir', (None, KB_DIR))
def test_build_index_no_kb(kb_dir):
    idx = build_index(PARKS_LAKE_DIR, kb_dir, use_kb=False)
    assert idx.kb_dir is None
    assert idx.meta['options']['use_kb'] is False
    assert all(
        annotation_source(annotation) is Source.SYNTH
        for annotation in idx.node_index
    )
    # without knowledge base every textual column is synthesized
    assert 'CS(famous_people#1)' in idx.node_index


def test_build_index_empty_lake(tmp_path):
    idx = build_index(str(tmp_path), KB_DIR)
    assert not idx
    assert idx.table_ids == []
    assert idx.node_index == {}
    assert idx.edge_index == {}


def test_build_index_skips_bad_tables(tmp_path, caplog):
    write_csv(tmp_path / 'good.csv', ['City'], [['Boston']])
    (tmp_path / 'bad.csv').write_text('', encoding='utf-8')
    idx = build_index(str(tmp_path), KB_DIR)
    assert idx.table_ids == ['good']
    assert idx.meta['skipped'] == ['bad']
    assert 'Skipping table' in caplog.text


def test_build_index_skips_ragged_tables(tmp_path):
    write_csv(tmp_path / 'good.csv', ['City'], [['Boston']])
    (tmp_path / 'ragged.csv').write_text(
        'Park,City,Country\nHyde Park,London\n', encoding='utf-8',
    )
    idx = build_index(str(tmp_path), KB_DIR)
    assert idx.table_ids == ['good']
    assert idx.meta['skipped'] == ['ragged']


def test_build_index_deterministic():
    assert build_index(PARKS_LAKE_DIR, KB_DIR) == build_index(
        PARKS_LAKE_DIR, KB_DIR,
    )


@pytest.mark.parametrize(
    ('first', 'second', 'expected_pair'),
    (
        (0.5, 0.8, (2, 3)),
        (0.8, 0.5, (0, 1)),
        # ties keep the smaller pair
        (0.5, 0.5, (0, 1)),
    ),
)
def test_graph_postings_retention(first, second, expected_pair):
    graph = SemanticGraph(
        table_id='t',
        columns={},
        relations={
            (0, 1): {Source.SYNTH: {'RS(u#0,1)': first}},
            (2, 3): {Source.SYNTH: {'RS(u#0,1)': second}},
        },
    )
    _, edges = graph_postings(graph)
    posting = edges[('RS(u#0,1)',)]
    assert isinstance(posting, EdgePosting)
    assert (posting.i, posting.j) == expected_pair
    assert posting.score == max(first, second)


def test_graph_postings_kb_product():
    graph = SemanticGraph(
        table_id='t',
        columns={
            0: {Source.KB: {'person': 0.5}},
            1: {Source.KB: {'place': 0.25, 'city': 0.5}},
        },
        relations={(0, 1): {Source.KB: {'birthplace': 0.8}}},
    )
    nodes, edges = graph_postings(graph)
    assert [annotation for annotation, _, _ in nodes] == [
        'person', 'city', 'place',
    ]
    assert set(edges) == {
        ('person', 'birthplace', 'place'),
        ('person', 'birthplace', 'city'),
    }
    assert edges[('person', 'birthplace', 'city')].score == pytest.approx(0.2)


def _recompute_lake(lake_dir, kb):
    tables = {
        table.table_id: table
        for table in map(ingest_table, list_lake_tables(lake_dir))
    }
    fds = {
        table_id: discover_unary_fds(table)
        for table_id, table in tables.items()
    }
    return tables, build_synth_kb(list(tables.values()), kb, fds)


@pytest.mark.parametrize(
    ('lake_dir', 'kb_dir'),
    (
        (PARKS_LAKE_DIR, KB_DIR),
        (FILMS_LAKE_DIR, KB_DIR),
        (FILMS_LAKE_DIR, None),
    ),
    ids=('parks', 'films', 'films without kb'),
)
def test_build_index_postings_match_semantics(lake_dir, kb_dir):
    idx = build_index(lake_dir, kb_dir, use_kb=kb_dir is not None)
    kb = load_kb(kb_dir) if kb_dir else KbStore.empty()
    tables, synth = _recompute_lake(lake_dir, kb)

    def kb_cs(table_id, index):
        return compute_column_semantics(
            kb, tables[table_id].column(index), Context.DATA_LAKE, table_id,
        ).confidences

    rng = random.Random(2)
    nodes = [
        (annotation, posting)
        for annotation, postings in idx.node_index.items()
        for posting in postings
    ]
    for annotation, posting in rng.sample(nodes, min(25, len(nodes))):
        table_id, index = posting.table_id, posting.column_index
        if annotation_source(annotation) is Source.KB:
            expected = kb_cs(table_id, index)[annotation]
        else:
            expected = lake_column_semantics(
                synth, table_id, index,
            ).confidences[annotation]
        assert posting.confidence == pytest.approx(expected)

    edges = [
        (key, posting)
        for key, postings in idx.edge_index.items()
        for posting in postings
    ]
    assert edges
    for key, posting in rng.sample(edges, min(25, len(edges))):
        table_id, i, j = posting.table_id, posting.i, posting.j
        if len(key) == 3:
            a1, predicate, a2 = key
            rs = compute_relationship_semantics(kb, tables[table_id], i, j)
            assert posting.rel_conf == pytest.approx(
                rs.confidences[predicate],
            )
            assert posting.left_conf == pytest.approx(kb_cs(table_id, i)[a1])
            assert posting.right_conf == pytest.approx(
                kb_cs(table_id, j)[a2],
            )
        else:
            (sid,) = key
            rs = lake_relationship_semantics(synth, table_id, i, j)
            assert posting.rel_conf == pytest.approx(rs.confidences[sid])
            assert (posting.left_conf, posting.right_conf) == (1.0, 1.0)
