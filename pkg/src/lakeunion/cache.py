"""Per user cache of parsed knowledge bases."""

import functools
import os
import shutil

from appdirs import user_data_dir
from diskcache import Cache

from lakeunion import __author__, __title__, __version__


DATA_DIR = user_data_dir(
    appname=__title__, appauthor=__author__, version=__version__)
KB_CACHE_EXPIRATION = 60 * 60 * 24 * 7  # 1 week


@functools.lru_cache(maxsize=None)
def get_cache():
    return Cache(DATA_DIR)


def clean_other_versions_cache():
    """Remove cache from other possible installed versions of the program.

    Only has sense to keep the cache of a single version, the one being
    executed.
    """
    caches_dir = os.path.abspath(os.path.dirname(DATA_DIR))
    if not os.path.isdir(caches_dir):
        return
    for dirname in os.listdir(caches_dir):
        if dirname != __version__:
            dirpath = os.path.join(caches_dir, dirname)
            shutil.rmtree(dirpath, ignore_errors=True)


def files_fingerprint(filepaths):
    """Build a cache key fragment from names, sizes and modification times.

    Missing files take part in the fingerprint too, so creating an
    optional file invalidates the previous entry.
    """
    parts = []
    for filepath in filepaths:
        try:
            stat = os.stat(filepath)
        except FileNotFoundError:
            parts.append(f'{os.path.abspath(filepath)}:-')
        else:
            parts.append(
                f'{os.path.abspath(filepath)}:{stat.st_size}'
                f':{stat.st_mtime_ns}',
            )
    return '|'.join(parts)


def cached(key, compute, use_cache=True, expire=KB_CACHE_EXPIRATION):
    """Return the cached value for ``key`` or compute and store it.

    Parameters
    ----------

    key : str
      Cache key.
    compute : callable
      Called without arguments when the key is not cached.
    use_cache : bool
      If false, always compute and don't touch the cache.
    expire : int
      Seconds until the stored value expires.
    """
    if not use_cache:
        return compute()
    cache = get_cache()
    value = cache.get(key)
    if value is None:
        value = compute()
        cache.set(key, value, expire=expire)
    return value
