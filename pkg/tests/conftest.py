from collections import defaultdict

import pytest

_VERDICTS: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.fixture
def record():
    """Register one part of an acceptance criterion: ``record(k, part, ok, detail)``."""

    def _record(k: int, part: str, ok: bool, detail: str = "") -> bool:
        _VERDICTS[k].append((part, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {k} [{part}] {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        parts = _VERDICTS[k]
        ok = all(p[1] for p in parts)
        failed = [p[0] for p in parts if not p[1]]
        tail = "" if ok else f" (failing: {', '.join(failed)})"
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {len(parts)} part(s){tail}")
