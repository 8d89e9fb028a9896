import numpy as np
import pytest
from hypothesis import settings

from cosim.graph import Graph
from cosim.synthgen import gen_er

settings.register_profile("repo", max_examples=40, deadline=None)
settings.load_profile("repo")


def random_graph(rng, max_n=7, p_lo=0.2, p_hi=0.7, gid="g"):
    n = int(rng.integers(1, max_n + 1))
    return gen_er(n, float(rng.uniform(p_lo, p_hi)), rng, gid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path4():
    return Graph("p4", 4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def triangle():
    return Graph("tri", 3, [(0, 1), (1, 2), (0, 2)])


# -- acceptance summary: one line per criterion at the end of the run ------

_acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.passed and report.when != "call":
        return
    num = marker.args[0]
    measured = dict(item.user_properties).get("measured", "")
    if report.failed or report.skipped or num not in _acceptance:
        _acceptance[num] = (report.outcome, measured)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        outcome, measured = _acceptance[num]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  {measured}")
