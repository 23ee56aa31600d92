import re
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

_criteria = {}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    key = (int(m.group(1)), m.group(2))
    if report.failed:
        _criteria[key] = "FAIL"
    elif report.when == "call" and key not in _criteria:
        _criteria[key] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), verdict in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {num} ({name.replace('_', ' ')}): {verdict}")
