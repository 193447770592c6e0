import math
import os
import sys

import pytest

# Ensure project root is on sys.path so tests can import qsl_relax
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from qsl_relax.core import BlochVector  # noqa: E402
from qsl_relax.presets import get_preset  # noqa: E402


@pytest.fixture
def b0():
    """Pure initial carbon state used by the preset runs."""
    s = 1.0 / math.sqrt(2.0)
    return BlochVector(s, 0.0, s)


@pytest.fixture
def p20():
    return get_preset("20mM-sim").params


@pytest.fixture
def p120():
    return get_preset("120mM-sim").params


@pytest.fixture
def p300():
    return get_preset("300mM-sim").params
