import os
import sys

import pytest


TESTS_DIR = os.path.abspath(os.path.dirname(__file__))
if TESTS_DIR not in sys.path:
    sys.path.append(TESTS_DIR)

from testing_helpers import KB_DIR  # noqa: E402

from lakeunion.kb_store import load_kb  # noqa: E402


@pytest.fixture(scope='session')
def kb():
    return load_kb(KB_DIR)
