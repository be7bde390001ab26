import json
import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).parent
ROOT = HERE.parent
PROBLEMS = ROOT / "problems"
sys.path.insert(0, str(HERE))

from minimax_jsr.problem import load_problem  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or rep.failed:
        number, title = mark.args
        prev = item.config._acceptance.get(number)
        ok = rep.passed and (prev is None or prev[1])
        item.config._acceptance[number] = (title, ok, rep.duration)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config._acceptance
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, duration = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({duration:.2f}s)")


@pytest.fixture(scope="session")
def frozen():
    return json.loads((HERE / "data" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def example1():
    return load_problem(PROBLEMS / "example1.json")


@pytest.fixture(scope="session")
def example2():
    return load_problem(PROBLEMS / "example2.json")


@pytest.fixture(scope="session")
def iru_problem():
    return load_problem(PROBLEMS / "iru_pair.json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
