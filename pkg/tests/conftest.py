import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sliceforge import default_scenario  # noqa: E402


@pytest.fixture
def cfg():
    return default_scenario(0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
