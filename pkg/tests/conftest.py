import re
from collections import defaultdict

import pytest

_ACCEPTANCE = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        label, text = marker.args
        measured = "; ".join(v for k, v in item.user_properties if k == "measured")
        number = int(re.match(r"\d+", label).group())
        _ACCEPTANCE[number].append((label, text, rep.passed, measured))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with its parts indented below."""
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        parts = sorted(_ACCEPTANCE[number])
        ok = all(p[2] for p in parts)
        failed = [p[0] for p in parts if not p[2]]
        head = parts[0][1] if len(parts) == 1 else f"{len(parts)} checks"
        suffix = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {head}{suffix}")
        for label, text, passed, measured in parts:
            detail = f"  [{measured}]" if measured else ""
            tr.write_line(f"        {'ok ' if passed else 'BAD'} {label:<4} {text}{detail}")
