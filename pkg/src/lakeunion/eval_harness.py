"""Ranked retrieval metrics and benchmark runs over binary ground truth."""

import enum
import glob
import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from lakeunion.errors import (
    BadColumn,
    EmptyIntentSemantics,
    EmptyTruth,
    IntentNotTextual,
    LakeIOError,
    TableFormatError,
    UnknownIntent,
)
from lakeunion.index_builder import load_index
from lakeunion.kb_store import KbStore, load_kb
from lakeunion.lake_model import ingest_table
from lakeunion.query_engine import (
    QueryMode,
    build_query_tree,
    resolve_intent,
    search_top_k,
)
from lakeunion.synth_kb import format_score


logger = logging.getLogger(__name__)

REPORT_JSON_FILENAME = 'report.json'
REPORT_TSV_FILENAME = 'report.tsv'
REPORT_TSV_HEADER = ('query_id', 'returned', 'precision', 'recall', 'map')

# queries failing with these are skipped instead of aborting the run
BAD_QUERY_ERRORS = (
    TableFormatError,
    LakeIOError,
    BadColumn,
    IntentNotTextual,
    UnknownIntent,
)


# accepted spellings of the variants, besides their values
MAP_VARIANT_ALIASES = {'paper': 'all-ranks'}


class MapVariant(enum.Enum):
    ALL_RANKS = 'all-ranks'
    STANDARD = 'standard'

    @classmethod
    def _missing_(cls, value):
        if value in MAP_VARIANT_ALIASES:
            return cls(MAP_VARIANT_ALIASES[value])
        return None


def load_ground_truth(truth_file):
    """Read a ground truth CSV with a header row.

    Each row pairs a query table id with one unionable lake table id.

    Returns
    -------

    dict
      Unionable table ids by query table id.
    """
    try:
        df = pd.read_csv(truth_file, dtype=str, na_filter=False)
    except pd.errors.EmptyDataError:
        return {}
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise TableFormatError(
            f"Ground truth '{truth_file}' is malformed: {exc}",
        ) from None
    except OSError as exc:
        raise LakeIOError(
            f"Ground truth '{truth_file}' can't be read: {exc}",
        ) from None
    if df.shape[1] < 2:
        raise TableFormatError(
            f"Ground truth '{truth_file}' needs two columns, query table id"
            ' and data lake table id.',
        )

    truth = defaultdict(set)
    for query_id, table_id in zip(df.iloc[:, 0], df.iloc[:, 1]):
        query_id, table_id = query_id.strip(), table_id.strip()
        if query_id and table_id:
            truth[query_id].add(table_id)
    return {query_id: frozenset(ids) for query_id, ids in truth.items()}


def _check_k(k):
    if k < 1:
        raise ValueError(f'k must be a positive integer, got {k}.')


def _hits(result, truth, k):
    return np.cumsum([table_id in truth for table_id in result[:k]])


def precision_recall_at_k(result, truth, k):
    """Precision and recall of the first ``k`` results.

    Results not returned count as incorrect, so precision is always
    divided by ``k``.

    Parameters
    ----------

    result : list
      Ranked table ids.
    truth : set
      Unionable table ids.
    k : int
      Cutoff.
    """
    _check_k(k)
    if not truth:
        raise EmptyTruth('Recall is undefined without unionable tables.')
    hits = _hits(result, truth, k)
    found = int(hits[-1]) if len(hits) else 0
    return found / k, found / len(truth)


def map_at_k(result, truth, k, variant=MapVariant.ALL_RANKS):
    """Mean average precision of the first ``k`` results.

    The ``all-ranks`` variant averages the precision at every returned rank up
    to ``k``. The ``standard`` variant averages it at the relevant ranks
    only, over ``min(k, |truth|)``.
    """
    _check_k(k)
    variant = MapVariant(variant)
    hits = _hits(result, truth, k)
    if not len(hits):
        return 0.0
    precisions = hits / np.arange(1, len(hits) + 1)
    if variant is MapVariant.ALL_RANKS:
        return float(np.mean(precisions))

    if not truth:
        raise EmptyTruth(
            'Average precision is undefined without unionable tables.',
        )
    relevant = np.array([table_id in truth for table_id in result[:k]])
    return float(precisions[relevant].sum() / min(k, len(truth)))


@dataclass(frozen=True)
class QueryEvaluation:
    query_id: str
    returned: Tuple[str, ...]
    precision: float
    recall: float
    average_precision: float


@dataclass(frozen=True)
class EvalReport:
    k: int
    mode: QueryMode
    variant: MapVariant
    queries: Tuple[QueryEvaluation, ...]
    skipped: FrozenSet[str] = frozenset()

    def _mean(self, attribute):
        if not self.queries:
            return None
        return float(np.mean([getattr(q, attribute) for q in self.queries]))

    @property
    def averages(self) -> Dict[str, Optional[float]]:
        return {
            'precision': self._mean('precision'),
            'recall': self._mean('recall'),
            'map': self._mean('average_precision'),
        }

    def to_json(self):
        return {
            'k': self.k,
            'mode': self.mode.value,
            'map_variant': self.variant.value,
            'averages': self.averages,
            'queries': [
                {
                    'query_id': q.query_id,
                    'returned': list(q.returned),
                    'precision': q.precision,
                    'recall': q.recall,
                    'map': q.average_precision,
                }
                for q in self.queries
            ],
            'skipped': sorted(self.skipped),
        }


def _read_intent(query_path):
    sidecar = os.path.splitext(query_path)[0] + '.json'
    try:
        with open(sidecar, encoding='utf-8') as f:
            return json.load(f)['intent']
    except FileNotFoundError:
        return None
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise TableFormatError(
            f"Intent sidecar '{sidecar}' is malformed: {exc}",
        ) from None


def run_benchmark(
    index_dir,
    queries_dir,
    truth_file,
    k,
    mode=QueryMode.FULL,
    variant=MapVariant.ALL_RANKS,
    kb_dir=None,
    quiet=True,
    use_cache=False,
):
    """Search every query of a benchmark and score the rankings.

    Parameters
    ----------

    index_dir : str
      Directory of a saved index.
    queries_dir : str
      Directory with ``<query>.csv`` tables and ``<query>.json`` sidecars
      naming their intent column.
    truth_file : str
      Ground truth CSV.
    k : int
      Cutoff of every metric.
    mode : QueryMode
      Semantics sources used by the searches.
    variant : MapVariant
      Mean average precision flavor.
    kb_dir : str
      Knowledge base directory, by default the one the index was built
      with.
    quiet : bool
      Don't display progress bars.
    use_cache : bool
      Reuse the cached parsed knowledge base.
    """
    _check_k(k)
    mode, variant = QueryMode(mode), MapVariant(variant)
    if not os.path.isdir(queries_dir):
        raise LakeIOError(
            f"The queries directory '{queries_dir}' doesn't exist.",
        )
    idx = load_index(index_dir)
    kb_dir = kb_dir or idx.kb_dir
    kb = load_kb(kb_dir, use_cache=use_cache) if kb_dir else KbStore.empty()
    truth = load_ground_truth(truth_file)

    evaluations, skipped = [], set()
    query_paths = sorted(glob.glob(os.path.join(queries_dir, '*.csv')))
    for query_path in tqdm(query_paths, desc='Queries', disable=quiet):
        query_id = os.path.splitext(os.path.basename(query_path))[0]
        try:
            intent = _read_intent(query_path)
        except TableFormatError as exc:
            logger.warning(f"Skipping query '{query_id}': {exc}")
            skipped.add(query_id)
            continue
        if intent is None:
            logger.warning(f"Skipping query '{query_id}': no intent sidecar")
            skipped.add(query_id)
            continue
        query_truth = truth.get(query_id, frozenset())
        if not query_truth:
            logger.warning(f"Skipping query '{query_id}': empty ground truth")
            skipped.add(query_id)
            continue

        try:
            q = ingest_table(query_path)
            tree = build_query_tree(q, resolve_intent(q, intent), kb, idx.synth)
        except BAD_QUERY_ERRORS as exc:
            logger.warning(f"Skipping query '{query_id}': {exc}")
            skipped.add(query_id)
            continue
        except EmptyIntentSemantics as exc:
            logger.warning(f"Query '{query_id}' returns nothing: {exc}")
            returned = ()
        else:
            returned = tuple(
                r.table_id for r in search_top_k(idx, tree, k, mode)
            )

        precision, recall = precision_recall_at_k(returned, query_truth, k)
        evaluations.append(
            QueryEvaluation(
                query_id=query_id,
                returned=returned,
                precision=precision,
                recall=recall,
                average_precision=map_at_k(
                    returned, query_truth, k, variant,
                ),
            ),
        )

    return EvalReport(
        k=k,
        mode=mode,
        variant=variant,
        queries=tuple(evaluations),
        skipped=frozenset(skipped),
    )


def _tsv_score(score):
    return '' if score is None else format_score(score)


def write_report(report, output_dir):
    """Write ``report.json`` and ``report.tsv`` to a directory."""
    try:
        os.makedirs(output_dir, exist_ok=True)
        with open(
            os.path.join(output_dir, REPORT_JSON_FILENAME), 'w',
            encoding='utf-8',
        ) as f:
            json.dump(report.to_json(), f, sort_keys=True, indent=2)
            f.write('\n')

        lines = ['\t'.join(REPORT_TSV_HEADER)]
        for q in report.queries:
            lines.append(
                f'{q.query_id}\t{len(q.returned)}'
                f'\t{_tsv_score(q.precision)}\t{_tsv_score(q.recall)}'
                f'\t{_tsv_score(q.average_precision)}',
            )
        averages = report.averages
        lines.append(
            f'average\t'
            f"\t{_tsv_score(averages['precision'])}"
            f"\t{_tsv_score(averages['recall'])}"
            f"\t{_tsv_score(averages['map'])}",
        )
        with open(
            os.path.join(output_dir, REPORT_TSV_FILENAME), 'w',
            encoding='utf-8',
        ) as f:
            f.write('\n'.join(lines) + '\n')
    except OSError as exc:
        raise LakeIOError(
            f"The report can't be written to '{output_dir}': {exc}",
        ) from None
