"""lakeunion CLI."""

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

from diskcache import Timeout as CacheTimeout
from importlib_metadata_argparse_version import ImportlibMetadataVersionAction

from lakeunion import __description__, __title__
from lakeunion.cache import get_cache
from lakeunion.errors import EmptyIntentSemantics, LakeUnionError
from lakeunion.eval_harness import (
    MAP_VARIANT_ALIASES,
    MapVariant,
    run_benchmark,
    write_report,
)
from lakeunion.index_builder import STAGES, build_index, load_index, save_index
from lakeunion.kb_store import KbStore, load_kb
from lakeunion.lake_model import ingest_table
from lakeunion.query_engine import (
    QueryMode,
    build_query_tree,
    format_explanation,
    format_results,
    resolve_intent,
    search_top_k,
)


# checked in order
LOG_LEVEL_ENVVARS = ('SANTOS_LOG', 'LAKEUNION_LOG')
LOG_FORMAT = '%(levelname)s: %(message)s'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
DEFAULT_K = 10

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_EMPTY_INTENT = 3

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Config:
    command: Optional[str]
    log_level: str = 'WARNING'
    quiet: bool = False
    use_cache: bool = True
    clear_cache: bool = False
    lake_dir: Optional[str] = None
    kb_dir: Optional[str] = None
    index_dir: Optional[str] = None
    use_kb: bool = True
    use_synth: bool = True
    table: Optional[str] = None
    intent: Optional[str] = None
    k: int = DEFAULT_K
    mode: QueryMode = QueryMode.FULL
    explain: bool = False
    queries_dir: Optional[str] = None
    truth_file: Optional[str] = None
    map_variant: MapVariant = MapVariant.ALL_RANKS
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"'--k' must be a positive integer, got {self.k}.")
        if self.log_level not in LOG_LEVELS:
            raise ValueError(
                f"Invalid log level '{self.log_level}'. Must be one of"
                f" {', '.join(LOG_LEVELS)}.",
            )
        QueryMode(self.mode)
        MapVariant(self.map_variant)


def _add_common_arguments(parser):
    parser.add_argument(
        '-q',
        '--quiet',
        dest='quiet',
        action='store_true',
        help="Don't display progress bars.",
    )
    parser.add_argument(
        '--log-level',
        dest='log_level',
        default=None,
        metavar='LEVEL',
        help='Logging level, one of DEBUG, INFO, WARNING, ERROR or'
        ' CRITICAL. As default, the value of the first environment'
        f" variable set among {', '.join(LOG_LEVEL_ENVVARS)} or WARNING.",
    )
    parser.add_argument(
        '-n',
        '--no-cache',
        '--nocache',
        dest='use_cache',
        action='store_false',
        help="Don't cache parsed knowledge bases.",
    )


def _add_search_arguments(parser):
    parser.add_argument(
        '--index',
        dest='index_dir',
        required=True,
        help='Directory of an index built by the index command.',
    )
    parser.add_argument(
        '--kb',
        dest='kb_dir',
        default=None,
        help='Knowledge base directory. As default, the one used to build'
        ' the index.',
    )
    parser.add_argument(
        '--k',
        '-k',
        dest='k',
        type=int,
        default=DEFAULT_K,
        help=f'Number of tables to return. As default, {DEFAULT_K}.',
    )
    parser.add_argument(
        '--mode',
        dest='mode',
        choices=[mode.value for mode in QueryMode],
        default=QueryMode.FULL.value,
        help="Semantics used for the search: 'full' (knowledge base and"
        " synthesized knowledge base), 'kb' or 'synth'.",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog=__title__, description=__description__,
    )
    parser.add_argument(
        '-v',
        '--version',
        action=ImportlibMetadataVersionAction,
        version='lakeunion %(version)s',
        version_from='lakeunion',
        help='Show program version number and exit.',
    )
    parser.add_argument(
        '-c',
        '--clear-cache',
        '--invalidate-cache',
        dest='clear_cache',
        action='store_true',
        help='Remove cache used internally by lakeunion and exit.',
    )
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')

    common = argparse.ArgumentParser(add_help=False)
    _add_common_arguments(common)

    index_parser = subparsers.add_parser(
        'index',
        parents=[common],
        help='Annotate the tables of a lake and build its index.',
    )
    index_parser.add_argument(
        '--lake',
        dest='lake_dir',
        required=True,
        help='Directory with the CSV tables of the data lake.',
    )
    index_parser.add_argument(
        '--kb',
        dest='kb_dir',
        default=None,
        help="Knowledge base directory. Required unless '--no-kb' is"
        ' passed.',
    )
    index_parser.add_argument(
        '--index',
        dest='index_dir',
        required=True,
        help='Directory where the index will be written.',
    )
    index_parser.add_argument(
        '--no-kb',
        dest='use_kb',
        action='store_false',
        help="Don't index knowledge base semantics.",
    )
    index_parser.add_argument(
        '--no-synth',
        dest='use_synth',
        action='store_false',
        help="Don't build the synthesized knowledge base.",
    )

    query_parser = subparsers.add_parser(
        'query',
        parents=[common],
        help='Search the tables unionable with a query table.',
    )
    _add_search_arguments(query_parser)
    query_parser.add_argument(
        '--table',
        dest='table',
        required=True,
        help='CSV file of the query table.',
    )
    query_parser.add_argument(
        '--intent',
        dest='intent',
        required=True,
        help='Intent column of the query table, by header or 0-based'
        ' index.',
    )
    query_parser.add_argument(
        '--explain',
        dest='explain',
        action='store_true',
        help='Print the matched column pairs of every result to stderr.',
    )

    eval_parser = subparsers.add_parser(
        'eval',
        parents=[common],
        help='Evaluate the rankings of a benchmark against its ground'
        ' truth.',
    )
    _add_search_arguments(eval_parser)
    eval_parser.add_argument(
        '--queries',
        dest='queries_dir',
        required=True,
        help="Directory with query tables '<query>.csv' and sidecars"
        " '<query>.json' naming their intent column.",
    )
    eval_parser.add_argument(
        '--truth',
        dest='truth_file',
        required=True,
        help='Ground truth CSV, with a header row and the columns query'
        ' table id and data lake table id.',
    )
    eval_parser.add_argument(
        '--map-variant',
        dest='map_variant',
        choices=[
            *(variant.value for variant in MapVariant),
            *MAP_VARIANT_ALIASES,
        ],
        default=MapVariant.ALL_RANKS.value,
        help="Mean average precision flavor: 'all-ranks' (or its alias"
        " 'paper') averages the precision at every rank, 'standard' at"
        ' relevant ranks only.',
    )
    eval_parser.add_argument(
        '-o',
        '--output',
        dest='output_dir',
        default=os.getcwd,
        help='Directory where report.json and report.tsv will be written.'
        ' As default, the current working directory.',
    )
    return parser


def parse_args(args):
    parser = build_parser()
    opts = parser.parse_args(args)

    if opts.command is None and not opts.clear_cache:
        parser.print_help(sys.stderr)
        sys.exit(EXIT_INPUT_ERROR)

    log_level = getattr(opts, 'log_level', None) or next(
        (
            os.environ[name] for name in LOG_LEVEL_ENVVARS
            if os.environ.get(name)
        ),
        'WARNING',
    )
    output_dir = getattr(opts, 'output_dir', None)
    if callable(output_dir):
        output_dir = output_dir()

    if (
        opts.command == 'index' and
        opts.use_kb and
        getattr(opts, 'kb_dir', None) is None
    ):
        parser.error(
            "the index command needs '--kb' unless '--no-kb' is passed",
        )

    try:
        return Config(
            command=opts.command,
            log_level=log_level.upper(),
            quiet=getattr(opts, 'quiet', False),
            use_cache=getattr(opts, 'use_cache', True),
            clear_cache=opts.clear_cache,
            lake_dir=getattr(opts, 'lake_dir', None),
            kb_dir=getattr(opts, 'kb_dir', None),
            index_dir=getattr(opts, 'index_dir', None),
            use_kb=getattr(opts, 'use_kb', True),
            use_synth=getattr(opts, 'use_synth', True),
            table=getattr(opts, 'table', None),
            intent=getattr(opts, 'intent', None),
            k=getattr(opts, 'k', DEFAULT_K),
            mode=QueryMode(getattr(opts, 'mode', QueryMode.FULL.value)),
            explain=getattr(opts, 'explain', False),
            queries_dir=getattr(opts, 'queries_dir', None),
            truth_file=getattr(opts, 'truth_file', None),
            map_variant=MapVariant(
                getattr(opts, 'map_variant', MapVariant.ALL_RANKS.value),
            ),
            output_dir=output_dir,
        )
    except ValueError as exc:
        parser.error(str(exc))


def configure_logging(level):
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def _load_query_kb(config, idx):
    kb_dir = config.kb_dir or idx.kb_dir
    if kb_dir is None:
        return KbStore.empty()
    return load_kb(kb_dir, use_cache=config.use_cache)


def cmd_index(config):
    idx = build_index(
        config.lake_dir,
        config.kb_dir,
        use_kb=config.use_kb,
        use_synth=config.use_synth,
        quiet=config.quiet,
        use_cache=config.use_cache,
    )
    start = time.perf_counter()
    save_index(idx, config.index_dir)
    timings = {**idx.timings, 'index write': time.perf_counter() - start}

    for stage in (*STAGES, 'index write'):
        if stage in timings:
            sys.stderr.write(f'{stage}: {timings[stage]:.3f}s\n')
    sys.stderr.write(
        f"Indexed {len(idx.table_ids)} tables into '{config.index_dir}'"
        f" ({len(idx.meta['skipped'])} skipped).\n",
    )
    return EXIT_OK


def cmd_query(config):
    idx = load_index(config.index_dir)
    kb = _load_query_kb(config, idx)
    q = ingest_table(config.table)
    tree = build_query_tree(
        q, resolve_intent(q, config.intent), kb, idx.synth,
    )
    results = search_top_k(idx, tree, config.k, config.mode)
    sys.stdout.write(format_results(results))
    if config.explain:
        sys.stderr.write(format_explanation(results))
    return EXIT_OK


def cmd_eval(config):
    report = run_benchmark(
        config.index_dir,
        config.queries_dir,
        config.truth_file,
        config.k,
        mode=config.mode,
        variant=config.map_variant,
        kb_dir=config.kb_dir,
        quiet=config.quiet,
        use_cache=config.use_cache,
    )
    write_report(report, config.output_dir)

    averages = report.averages
    if averages['precision'] is None:
        sys.stderr.write('No query was evaluated.\n')
    else:
        sys.stderr.write(
            f'{len(report.queries)} queries, k={report.k}:'
            f" P@k {averages['precision']:.4f},"
            f" R@k {averages['recall']:.4f},"
            f" MAP@k {averages['map']:.4f}\n",
        )
    return EXIT_OK


COMMANDS = {
    'index': cmd_index,
    'query': cmd_query,
    'eval': cmd_eval,
}


def run(args):
    config = parse_args(args)
    configure_logging(config.log_level)

    # cache invalidation
    if config.clear_cache:
        try:
            get_cache().clear()
        except CacheTimeout:
            sys.stderr.write("An error happen clearing lakeunion's cache.\n")
            return EXIT_FAILURE
        else:
            sys.stderr.write('Cache removed successfully!\n')
            return EXIT_OK

    if config.use_cache:
        try:
            get_cache().expire()  # remove expired items from cache
        except CacheTimeout:
            logger.warning("lakeunion's cache couldn't be expired")

    try:
        return COMMANDS[config.command](config)
    except EmptyIntentSemantics as exc:
        sys.stderr.write(f'{exc}\n')
        return EXIT_EMPTY_INTENT
    except LakeUnionError as exc:
        sys.stderr.write(f'Error: {exc}\n')
        return EXIT_INPUT_ERROR
    except KeyboardInterrupt:
        return EXIT_FAILURE


def main():  # pragma: no cover
    sys.exit(run(sys.argv[1:]))
