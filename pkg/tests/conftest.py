import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ptss.syntax import parse_spec, parse_term  # noqa: E402

CORPUS = Path(__file__).resolve().parents[1] / "src" / "ptss" / "corpus"


def load(name):
    return parse_spec((CORPUS / f"{name}.ptss").read_text())


@pytest.fixture
def corpus():
    return load


@pytest.fixture
def term():
    def make(p, text):
        return parse_term(text, p.signature)
    return make

from hypothesis import settings  # noqa: E402

# deterministic example generation keeps test_output.txt reproducible
settings.register_profile("repro", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("repro")


# -- acceptance reporting -------------------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n, title = mark.args
    _, ok, secs = _criteria.get(n, (title, True, 0.0))
    _criteria[n] = (title, ok and rep.passed, secs + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok, secs = _criteria[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.2f} s)")
