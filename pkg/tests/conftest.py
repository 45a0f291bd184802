import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from soliton_lab import disk_domain, solve_graph  # noqa: E402


@pytest.fixture(scope="session")
def disk05():
    return disk_domain(1.0, 0.05)


@pytest.fixture(scope="session")
def bowl05(disk05):
    return solve_graph(disk05, 0.0)
