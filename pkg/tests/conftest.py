import sys

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from pseudoabel.fixtures import random_jseries

settings.register_profile("default", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("default")


def series_strategy(**kw):
    """Random J-series drawn from a hypothesis-controlled seed."""
    return st.integers(0, 2**32 - 1).map(lambda s: random_jseries(np.random.default_rng(s), **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or next(
        (m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
