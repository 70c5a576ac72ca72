from collections import defaultdict

import pytest

from unbnet import default_scenario

_acceptance = defaultdict(list)   # criterion -> [(passed, detail)]


@pytest.fixture
def scenario():
    """Default evaluation scenario, Type-I incumbents, M=5, N=3."""
    return default_scenario()


@pytest.fixture
def single_band():
    return default_scenario(M=1)


@pytest.fixture
def record():
    """record(criterion, passed, detail) for the acceptance summary."""
    def add(criterion, passed, detail):
        _acceptance[criterion].append((bool(passed), detail))
    return add


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_acceptance, key=str):
        checks = _acceptance[crit]
        ok = all(p for p, _ in checks)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {sum(p for p, _ in checks)}/{len(checks)} checks")
        for p, detail in checks:
            tr.write_line(f"    [{'ok' if p else 'FAIL'}] {detail}")
