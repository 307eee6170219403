"""lakeunion: semantic table union search over CSV data lakes."""

__author__ = 'lakeunion'
__description__ = (
    'Find the data lake tables unionable with a query table, anchored at an'
    ' intent column, using column and relationship semantics from a'
    ' knowledge base and from a knowledge base synthesized from the lake.'
)
__title__ = 'lakeunion'
__version__ = '0.1.0'

from lakeunion.cli import main, run  # noqa: E402


__all__ = ['main', 'run']
