import contextlib
import time

import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion.

    Usage: ``with acceptance("C1", "description", budget_s) as note: ...``;
    ``note(text)`` attaches measured values. Any exception (including a
    failed assert) marks the criterion FAIL and propagates.
    """

    @contextlib.contextmanager
    def record(cid, title, budget=None):
        notes = []
        t0 = time.perf_counter()
        status, reason = "PASS", ""
        try:
            yield notes.append
            elapsed = time.perf_counter() - t0
            notes.append(f"{elapsed:.2f}s")
            if budget is not None and elapsed > budget:
                raise AssertionError(f"runtime {elapsed:.2f}s exceeds {budget}s")
        except BaseException as exc:
            status = "FAIL"
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            raise
        finally:
            detail = "; ".join(notes + ([reason] if reason else []))
            line = f"{cid:<4} {status}  {title}  [{detail}]"
            _ACCEPTANCE.append(line)
            print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
