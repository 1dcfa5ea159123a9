import numpy as np
import pytest

from onsagerlab import Torus, disk


@pytest.fixture(scope="session")
def t1():
    return Torus((1.0,))


@pytest.fixture(scope="session")
def t2():
    return Torus((1.0, 1.0))


@pytest.fixture(scope="session")
def unit_disk():
    return disk()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, text = mark.args
    entry = _CRITERIA.setdefault(num, {"text": text, "ok": True, "seconds": 0.0})
    if rep.when == "call":
        entry["seconds"] += rep.duration
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if e['ok'] else 'FAIL'}  {e['text']}  "
                                    f"({e['seconds']:.1f} s)")
