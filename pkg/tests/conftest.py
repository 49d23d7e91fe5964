import re

import pytest

from obsta.scenario import toy_example

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def toy():
    return toy_example()


@pytest.fixture
def record_criterion():
    def record(cid: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[cid] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (int(re.match(r"\d+", c).group()), c)):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if passed else 'FAIL'}  {detail}")
