import copy

import numpy as np
import pytest

from laacosim.grid import case_from_dict, load_case

TWO_BUS = {
    "name": "two-bus",
    "areas": [{"id": 1}],
    "buses": [{"id": 1, "area": 1}, {"id": 2, "area": 1}],
    "branches": [{"from": 1, "to": 2, "b": 5.0}],
    "generators": [{"bus": 1, "M": 10.0, "D": 1.0, "R": 1.0, "KP": 1.0, "KI": 0.5, "alpha": 1.0}],
    "loads": [{"bus": 2, "p": 2.0, "vulnerable": 0.5}],
}

# two generators, one load bus, two areas joined by the 1-2 and 2-3 lines
THREE_BUS = {
    "name": "three-bus",
    "areas": [{"id": 1}, {"id": 2}],
    "buses": [{"id": 1, "area": 1}, {"id": 2, "area": 2}, {"id": 3, "area": 1}],
    "branches": [{"from": 1, "to": 3, "b": 4.0}, {"from": 2, "to": 3, "b": 6.0},
                 {"from": 1, "to": 2, "b": 2.0}],
    "generators": [
        {"bus": 1, "M": 8.0, "D": 0.5, "R": 1.2, "KP": 1.2, "KI": 0.0, "alpha": 1.0},
        {"bus": 2, "M": 5.0, "D": 0.4, "R": 0.8, "KP": 0.8, "KI": 0.0, "alpha": 1.0},
    ],
    "loads": [{"bus": 3, "p": 3.0, "vulnerable": 0.6}],
}


def make_doc(base, **changes):
    doc = copy.deepcopy(base)
    doc.update(changes)
    return doc


@pytest.fixture
def two_bus():
    return case_from_dict(copy.deepcopy(TWO_BUS))


@pytest.fixture
def three_bus():
    return case_from_dict(copy.deepcopy(THREE_BUS))


@pytest.fixture(scope="session")
def ieee39():
    return load_case("ieee39")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line, then fail the test if the check did not hold."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    def check(number, ok, detail):
        results[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
