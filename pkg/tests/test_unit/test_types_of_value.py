"""Tests for 'types_of_value' and 'predicates_of_pair' functions."""

import pytest
from testing_helpers import write_kb

from lakeunion.kb_store import load_kb, predicates_of_pair, types_of_value
from lakeunion.lake_model import ValuePair


@pytest.mark.parametrize(
    ('value', 'expected'),
    (
        (
            'boston',
            {
                'city',
                'administrative_area',
                'place',
                'music_album',
                'creative_work',
            },
        ),
        ('texas', {'state', 'administrative_area', 'place'}),
        ('adele', {'person'}),
        ('zzz', set()),
        ('', set()),
    ),
)
def test_types_of_value(kb, value, expected):
    assert types_of_value(kb, value) == expected


def test_types_of_value_monotone(tmp_path):
    hierarchy = [('place', 'thing'), ('city', 'place'), ('work', 'thing')]
    entities = [('Boston', 'b')]
    before = load_kb(
        write_kb(
            str(tmp_path / 'before'),
            entities=entities,
            types=[('b', 'city')],
            hierarchy=hierarchy,
        ),
    )
    after = load_kb(
        write_kb(
            str(tmp_path / 'after'),
            entities=entities,
            types=[('b', 'city'), ('b', 'work')],
            hierarchy=hierarchy,
        ),
    )
    assert types_of_value(before, 'boston') == {'city', 'place'}
    assert types_of_value(after, 'boston') == {'city', 'place', 'work'}


@pytest.mark.parametrize(
    ('pair', 'expected'),
    (
        (('adele', 'london'), {'birthplace'}),
        (('london', 'adele'), set()),
        (('london', 'uk'), {'located_in'}),
        (('adele', 'united kingdom'), {'citizen_of'}),
        (('nobody', 'nowhere'), set()),
    ),
)
def test_predicates_of_pair(kb, pair, expected):
    assert predicates_of_pair(kb, ValuePair(*pair)) == expected


def test_predicates_of_pair_ordered(tmp_path):
    kb = load_kb(
        write_kb(
            str(tmp_path),
            entities=[('George Washington', 'gw'), ('Virginia', 'va')],
            types=[('gw', 'person'), ('va', 'place')],
            hierarchy=[('person', 'thing'), ('place', 'thing')],
            facts=[('gw', 'birthplace', 'va'), ('va', 'home_of', 'gw')],
        ),
    )
    pair = ValuePair('george washington', 'virginia')
    assert predicates_of_pair(kb, pair) == {'birthplace'}
    assert predicates_of_pair(kb, pair.reversed()) == {'home_of'}
