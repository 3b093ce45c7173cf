import pytest

# criterion number -> list of (part, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def record():
    """Register the outcome of one acceptance (sub-)criterion."""

    def _record(number, part, passed, detail):
        ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
        print(f"criterion {number}{part}: {'PASS' if passed else 'FAIL'} - {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{part or '-'} {'pass' if p else 'FAIL'}: {d}" for part, p, d in parts)
        tr.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  [{detail}]")
