"""Tests for 'load_kb' function."""

import os

import pytest
from testing_helpers import KB_DIR, write_kb

from lakeunion.errors import (
    KbCycleError,
    KbDanglingReference,
    KbFormatError,
    KbMultiRootError,
    LakeIOError,
)
from lakeunion.kb_store import load_kb


def test_load_kb_fixture(kb):
    assert kb.entity_dict['boston'] == {'boston_city', 'boston_album'}
    assert kb.entity_dict['usa'] == kb.entity_dict['united states'] == {'usa'}
    assert kb.root == 'thing'
    assert kb.top_level_types == {'place', 'person', 'creative_work'}
    assert kb.inheritance['city'] == 'administrative_area'
    assert kb.relationship_dict[('adele', 'london_city')] == {'birthplace'}
    assert kb.predicate_counts['birthplace'] == 5
    assert kb.predicate_counts['led_by'] == 6


def test_load_kb_counts(kb):
    # declared statistics of the full knowledge base
    assert kb.type_counts['place'] == 6000000
    assert kb.type_counts['city'] == 42000

    for child, parent in kb.inheritance.items():
        assert kb.type_counts[parent] >= kb.type_counts[child]


def test_load_kb_transitive_counts(tmp_path):
    kb = load_kb(
        write_kb(
            str(tmp_path),
            entities=[('Boston', 'b'), ('Texas', 't'), ('Barnet', 'n')],
            types=[('b', 'city'), ('t', 'state'), ('n', 'area')],
            hierarchy=[
                ('place', 'thing'),
                ('area', 'place'),
                ('city', 'area'),
                ('state', 'area'),
            ],
        ),
    )
    assert kb.type_counts == {
        'thing': 3, 'place': 3, 'area': 3, 'city': 1, 'state': 1,
    }
    assert kb.top_level_types == {'place'}
    assert kb.relationship_dict == {}


def test_load_kb_comments_and_case(tmp_path):
    kb_dir = write_kb(
        str(tmp_path),
        entities=[('  Brands  Park. ', 'BP')],
        types=[('bp', 'Park')],
        hierarchy=[('park', 'place'), ('place', 'thing')],
    )
    with open(os.path.join(kb_dir, 'entities.tsv'), 'a') as f:
        f.write('# label\tentity\n\n')
    kb = load_kb(kb_dir)
    assert kb.entity_dict == {'brands park': {'bp'}}
    assert kb.type_dict == {'bp': {'park'}}


@pytest.mark.parametrize(
    ('hierarchy', 'types', 'facts', 'expected_error'),
    (
        (
            [('city', 'place'), ('place', 'city')],
            [],
            [],
            KbCycleError,
        ),
        (
            [('city', 'place'), ('person', 'agent')],
            [],
            [],
            KbMultiRootError,
        ),
        (
            [('city', 'place'), ('place', 'thing')],
            [('boston', 'village')],
            [],
            KbDanglingReference,
        ),
        (
            [('city', 'place'), ('place', 'thing')],
            [('nobody', 'city')],
            [],
            KbDanglingReference,
        ),
        (
            [('city', 'place'), ('place', 'thing')],
            [],
            [('boston', 'twin_of', 'nobody')],
            KbDanglingReference,
        ),
        (
            [('city', 'place'), ('city', 'area'), ('place', 'thing')],
            [],
            [],
            KbFormatError,
        ),
        (
            [('city', 'place', 'thing')],
            [],
            [],
            KbFormatError,
        ),
    ),
)
def test_load_kb_errors(tmp_path, hierarchy, types, facts, expected_error):
    kb_dir = write_kb(
        str(tmp_path),
        entities=[('Boston', 'boston')],
        types=types,
        hierarchy=hierarchy,
        facts=facts,
    )
    with pytest.raises(expected_error):
        load_kb(kb_dir)


@pytest.mark.parametrize('count', ('-3', 'many'))
def test_load_kb_invalid_count(tmp_path, count):
    kb_dir = write_kb(
        str(tmp_path),
        hierarchy=[('place', 'thing')],
        counts=[('place', count)],
    )
    with pytest.raises(KbFormatError):
        load_kb(kb_dir)


def test_load_kb_missing(tmp_path):
    with pytest.raises(LakeIOError):
        load_kb(str(tmp_path / 'missing'))

    os.remove(os.path.join(write_kb(str(tmp_path)), 'facts.tsv'))
    with pytest.raises(LakeIOError):
        load_kb(str(tmp_path))


def test_load_kb_cached(tmp_path, monkeypatch):
    store = {}

    class FakeCache:
        def get(self, key):
            return store.get(key)

        def set(self, key, value, expire=None):  # noqa: ARG002
            store[key] = value

    monkeypatch.setattr('lakeunion.cache.get_cache', lambda: FakeCache())
    monkeypatch.setattr(
        'lakeunion.kb_store.clean_other_versions_cache', lambda: None,
    )

    first = load_kb(KB_DIR, use_cache=True)
    assert len(store) == 1
    assert load_kb(KB_DIR, use_cache=True) is first
