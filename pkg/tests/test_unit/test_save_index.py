"""Tests for 'save_index' and 'load_index' functions."""

import json
import os

import pytest
from testing_helpers import FILMS_LAKE_DIR, KB_DIR, PARKS_LAKE_DIR

from lakeunion.errors import IndexVersionError, LakeIOError
from lakeunion.index_builder import (
    INDEX_FILENAMES,
    META_FILENAME,
    NODE_INDEX_FILENAME,
    build_index,
    load_index,
    save_index,
)
from lakeunion.kb_semantics import Source


@pytest.fixture(scope='module')
def parks_index():
    return build_index(PARKS_LAKE_DIR, KB_DIR)


def test_save_index_files(parks_index, tmp_path):
    save_index(parks_index, str(tmp_path / 'index'))
    assert sorted(os.listdir(tmp_path / 'index')) == sorted(INDEX_FILENAMES)


@pytest.mark.parametrize('lake_dir', (PARKS_LAKE_DIR, FILMS_LAKE_DIR))
def test_save_index_round_trip(lake_dir, tmp_path):
    idx = build_index(lake_dir, KB_DIR)
    save_index(idx, str(tmp_path))
    loaded = load_index(str(tmp_path))

    assert loaded == idx
    assert loaded.kb_dir == os.path.abspath(KB_DIR)
    for table_id in idx.table_ids:
        assert loaded.graph(table_id) == idx.graph(table_id)


def test_save_index_loaded_graph(parks_index, tmp_path):
    save_index(parks_index, str(tmp_path))
    graph = load_index(str(tmp_path)).graph('park_films')
    assert graph.relationship_semantics(0, 3, Source.KB) == {
        'located_in': 1.0,
    }


def test_save_index_byte_identical(tmp_path):
    for name in ('first', 'second'):
        save_index(
            build_index(PARKS_LAKE_DIR, KB_DIR), str(tmp_path / name),
        )
    for filename in INDEX_FILENAMES:
        assert (tmp_path / 'first' / filename).read_bytes() == (
            tmp_path / 'second' / filename
        ).read_bytes()


def test_load_index_missing_dir(tmp_path):
    with pytest.raises(LakeIOError, match="doesn't exist"):
        load_index(str(tmp_path / 'missing'))


def test_load_index_version(parks_index, tmp_path):
    save_index(parks_index, str(tmp_path))
    meta_path = tmp_path / META_FILENAME
    meta = json.loads(meta_path.read_text(encoding='utf-8'))
    meta['format_version'] += 1
    meta_path.write_text(json.dumps(meta), encoding='utf-8')

    with pytest.raises(IndexVersionError, match='Rebuild'):
        load_index(str(tmp_path))


def test_load_index_corrupt(parks_index, tmp_path):
    save_index(parks_index, str(tmp_path))
    (tmp_path / NODE_INDEX_FILENAME).write_text('{"park": [', encoding='utf-8')
    with pytest.raises(LakeIOError, match='not valid JSON'):
        load_index(str(tmp_path))


def test_load_index_missing_file(parks_index, tmp_path):
    save_index(parks_index, str(tmp_path))
    os.remove(tmp_path / NODE_INDEX_FILENAME)
    with pytest.raises(LakeIOError, match="can't be read"):
        load_index(str(tmp_path))
