import pytest

_CRITERIA = []


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion.

    Call ``criterion(number, title)`` first, then ``check(ok, detail)`` for
    each assertion; the line is printed in the terminal summary.
    """

    class Recorder:
        def __call__(self, number, title):
            self.entry = {"number": number, "title": title, "ok": True, "details": []}
            _CRITERIA.append(self.entry)
            return self

        def check(self, ok, detail):
            self.entry["details"].append(detail)
            if not ok:
                self.entry["ok"] = False
            line = f"[criterion {self.entry['number']}] {'ok  ' if ok else 'FAIL'} {detail}"
            print(line)
            assert ok, detail

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(_CRITERIA, key=lambda e: e["number"]):
        verdict = "PASS" if e["ok"] else "FAIL"
        last = e["details"][-1] if e["details"] else ""
        terminalreporter.write_line(f"{verdict}  {e['number']:>2}. {e['title']}  ({last})")
