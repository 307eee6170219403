"""Knowledge base dictionaries loaded from TSV fixtures.

A knowledge base directory contains:

- ``entities.tsv``: ``label \\t entity-id``, labels and alternate names.
- ``types.tsv``: ``entity-id \\t type-id``.
- ``hierarchy.tsv``: ``child-type \\t parent-type``, a single rooted tree.
- ``facts.tsv``: ``subject-id \\t predicate-id \\t object-id``.
- ``counts.tsv`` (optional): ``type-id \\t entity-count``, statistics of the
  full knowledge base the fixture is sliced from.

Lines starting with ``#`` and blank lines are ignored.
"""

import functools
import logging
import os
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Tuple

from lakeunion.cache import (
    cached,
    clean_other_versions_cache,
    files_fingerprint,
)
from lakeunion.errors import (
    KbCycleError,
    KbDanglingReference,
    KbFormatError,
    KbMultiRootError,
    LakeIOError,
)
from lakeunion.lake_model import normalize_value


logger = logging.getLogger(__name__)

ENTITIES_FILENAME = 'entities.tsv'
TYPES_FILENAME = 'types.tsv'
HIERARCHY_FILENAME = 'hierarchy.tsv'
FACTS_FILENAME = 'facts.tsv'
COUNTS_FILENAME = 'counts.tsv'
REQUIRED_FILENAMES = (
    ENTITIES_FILENAME,
    TYPES_FILENAME,
    HIERARCHY_FILENAME,
    FACTS_FILENAME,
)


@dataclass(frozen=True)
class KbStore:
    entity_dict: Dict[str, FrozenSet[str]]
    type_dict: Dict[str, FrozenSet[str]]
    inheritance: Dict[str, str]
    type_counts: Dict[str, int]
    relationship_dict: Dict[Tuple[str, str], FrozenSet[str]]
    predicate_counts: Dict[str, int]
    top_level_types: FrozenSet[str]
    root: Optional[str]

    @classmethod
    def empty(cls):
        """A knowledge base that maps nothing."""
        return cls(
            entity_dict={},
            type_dict={},
            inheritance={},
            type_counts={},
            relationship_dict={},
            predicate_counts={},
            top_level_types=frozenset(),
            root=None,
        )

    def ancestors(self, type_id):
        """Yield the parents of a type, closest first, root included."""
        parent = self.inheritance.get(type_id)
        while parent is not None:
            yield parent
            parent = self.inheritance.get(parent)

    def top_level_of(self, type_id):
        if type_id in self.top_level_types:
            return type_id
        for ancestor in self.ancestors(type_id):
            if ancestor in self.top_level_types:
                return ancestor
        return None


def _normalize_id(raw):
    return raw.strip().lower()


def _read_tsv(filepath, n_fields):
    try:
        with open(filepath, encoding='utf-8') as f:
            for lineno, line in enumerate(f, start=1):
                stripped = line.rstrip('\r\n')
                if not stripped.strip() or stripped.lstrip().startswith('#'):
                    continue
                fields = stripped.split('\t')
                if len(fields) != n_fields or not all(
                    field.strip() for field in fields
                ):
                    raise KbFormatError(
                        f"{filepath}:{lineno}: expected {n_fields}"
                        ' tab separated non empty fields.',
                    )
                yield lineno, fields
    except OSError as exc:
        raise LakeIOError(
            f"Knowledge base file '{filepath}' can't be read: {exc}",
        ) from None


def _find_root(inheritance, declared_types):
    for type_id in sorted(inheritance):
        seen = {type_id}
        parent = inheritance.get(type_id)
        while parent is not None:
            if parent in seen:
                raise KbCycleError(
                    f"The type hierarchy has a cycle through '{parent}'.",
                )
            seen.add(parent)
            parent = inheritance.get(parent)

    roots = sorted(t for t in declared_types if t not in inheritance)
    if len(roots) > 1:
        raise KbMultiRootError(
            f"The type hierarchy has {len(roots)} roots: {', '.join(roots)}.",
        )
    return roots[0] if roots else None


def _parse_kb(kb_dir):
    filepath = functools.partial(os.path.join, kb_dir)

    entity_dict = defaultdict(set)
    declared_entities = set()
    for _, (label, entity) in _read_tsv(filepath(ENTITIES_FILENAME), 2):
        entity = _normalize_id(entity)
        declared_entities.add(entity)
        value = normalize_value(label)
        if value:
            entity_dict[value].add(entity)

    inheritance = {}
    declared_types = set()
    for lineno, (child, parent) in _read_tsv(
        filepath(HIERARCHY_FILENAME), 2,
    ):
        child, parent = _normalize_id(child), _normalize_id(parent)
        if inheritance.get(child, parent) != parent:
            raise KbFormatError(
                f'{HIERARCHY_FILENAME}:{lineno}: type \'{child}\' has two'
                f" parents, '{inheritance[child]}' and '{parent}'.",
            )
        inheritance[child] = parent
        declared_types.update((child, parent))
    root = _find_root(inheritance, declared_types)

    type_dict = defaultdict(set)
    for lineno, (entity, type_id) in _read_tsv(filepath(TYPES_FILENAME), 2):
        entity, type_id = _normalize_id(entity), _normalize_id(type_id)
        if entity not in declared_entities:
            raise KbDanglingReference(
                f"{TYPES_FILENAME}:{lineno}: undeclared entity '{entity}'.",
            )
        if type_id not in declared_types:
            raise KbDanglingReference(
                f"{TYPES_FILENAME}:{lineno}: undeclared type '{type_id}'.",
            )
        type_dict[entity].add(type_id)

    relationship_dict = defaultdict(set)
    predicate_pairs = defaultdict(set)
    for lineno, (subject, predicate, obj) in _read_tsv(
        filepath(FACTS_FILENAME), 3,
    ):
        subject, predicate, obj = (
            _normalize_id(subject),
            _normalize_id(predicate),
            _normalize_id(obj),
        )
        for entity in (subject, obj):
            if entity not in declared_entities:
                raise KbDanglingReference(
                    f"{FACTS_FILENAME}:{lineno}: undeclared entity"
                    f" '{entity}'.",
                )
        relationship_dict[(subject, obj)].add(predicate)
        predicate_pairs[predicate].add((subject, obj))

    # every entity counts for its types and all their ancestors
    members = defaultdict(set)
    parents = inheritance.get
    for entity, type_ids in type_dict.items():
        for type_id in type_ids:
            current = type_id
            while current is not None:
                members[current].add(entity)
                current = parents(current)
    type_counts = Counter(
        {t: len(members.get(t, ())) for t in declared_types},
    )

    counts_filepath = filepath(COUNTS_FILENAME)
    if os.path.isfile(counts_filepath):
        for lineno, (type_id, count) in _read_tsv(counts_filepath, 2):
            type_id = _normalize_id(type_id)
            if type_id not in declared_types:
                raise KbDanglingReference(
                    f"{COUNTS_FILENAME}:{lineno}: undeclared type"
                    f" '{type_id}'.",
                )
            try:
                declared = int(count)
            except ValueError:
                declared = -1
            if declared < 0:
                raise KbFormatError(
                    f'{COUNTS_FILENAME}:{lineno}: invalid count'
                    f" '{count}'.",
                )
            type_counts[type_id] = max(type_counts[type_id], declared)
        # ancestors are never rarer than their descendants
        for type_id in sorted(declared_types):
            current = parents(type_id)
            while current is not None:
                if type_counts[current] < type_counts[type_id]:
                    type_counts[current] = type_counts[type_id]
                current = parents(current)

    top_level_types = frozenset(
        t for t, parent in inheritance.items() if parent == root
    )

    return KbStore(
        entity_dict={k: frozenset(v) for k, v in entity_dict.items()},
        type_dict={k: frozenset(v) for k, v in type_dict.items()},
        inheritance=inheritance,
        type_counts=dict(type_counts),
        relationship_dict={
            k: frozenset(v) for k, v in relationship_dict.items()
        },
        predicate_counts={k: len(v) for k, v in predicate_pairs.items()},
        top_level_types=top_level_types,
        root=root,
    )


def load_kb(kb_dir, use_cache=False):
    """Load the four knowledge base dictionaries of a fixture directory.

    Parameters
    ----------

    kb_dir : str
      Directory with the TSV files.
    use_cache : bool
      Reuse a previously parsed knowledge base from the user cache while
      none of the files changed.
    """
    if not os.path.isdir(kb_dir):
        raise LakeIOError(
            f"The knowledge base directory '{kb_dir}' doesn't exist.",
        )
    for filename in REQUIRED_FILENAMES:
        if not os.path.isfile(os.path.join(kb_dir, filename)):
            raise LakeIOError(
                f"The knowledge base directory '{kb_dir}' has no"
                f" '{filename}' file.",
            )

    if use_cache:
        clean_other_versions_cache()
    key = 'kb:' + files_fingerprint(
        os.path.join(kb_dir, filename)
        for filename in (*REQUIRED_FILENAMES, COUNTS_FILENAME)
    )
    kb = cached(key, lambda: _parse_kb(kb_dir), use_cache=use_cache)
    logger.info(
        f'Knowledge base {kb_dir}: {len(kb.entity_dict)} labels,'
        f' {len(kb.type_counts)} types, {len(kb.predicate_counts)}'
        ' predicates',
    )
    return kb


def types_of_value(kb, value):
    """Types of the entities labeled ``value`` with their ancestors.

    The ancestor closure stops at (and includes) the top level type; the
    root is never part of it.
    """
    types = set()
    for entity in kb.entity_dict.get(value, ()):
        for type_id in kb.type_dict.get(entity, ()):
            current = type_id
            while current is not None and current != kb.root:
                types.add(current)
                if current in kb.top_level_types:
                    break
                current = kb.inheritance.get(current)
    return frozenset(types)


def predicates_of_pair(kb, pair):
    """Predicates linking entities labeled ``pair.left`` to entities labeled
    ``pair.right``, in that direction.
    """
    predicates = set()
    for subject in kb.entity_dict.get(pair.left, ()):
        for obj in kb.entity_dict.get(pair.right, ()):
            predicates.update(kb.relationship_dict.get((subject, obj), ()))
    return frozenset(predicates)
