from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(f"{status:<4} {name}: {detail}")


@pytest.fixture
def flood_active():
    from gsa import models

    return models.flood_space().subset(models.FLOOD_ACTIVE)
