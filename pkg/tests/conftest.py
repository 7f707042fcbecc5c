import numpy as np
import pytest
from hypothesis import settings

from mdera_ccuc.cases import toy_case
from mdera_ccuc.network import Bus, Der, Generator, Line, MDera, NetworkCase
from mdera_ccuc.scenarios import ScenarioSet

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


def triangle_case(horizon: int = 4, peak: float = 90.0) -> NetworkCase:
    """3 equal-reactance buses, 2 generators and a 2-DER M-DERA."""
    buses = [Bus(0, True), Bus(1), Bus(2)]
    lines = [Line(0, 0, 1, 0.1, 40.0), Line(1, 1, 2, 0.1, 200.0), Line(2, 0, 2, 0.1, 200.0)]
    gens = [
        Generator(0, 0, 10.0, 120.0, 60.0, 60.0, 2, 2, 100.0, 10.0, ((10.0, 50.0), (14.0, -30.0)),
                  sr_limit=30.0, initial_hours=5, initial_power=50.0),
        Generator(1, 2, 5.0, 50.0, 50.0, 50.0, 1, 1, 40.0, 0.0, ((30.0, 20.0),), sr_limit=50.0,
                  nr_limit=50.0, quick_start=True),
    ]
    ders = (Der(0, 1, 15.0, 20.0), Der(1, 2, 15.0, 6.0))
    mderas = [MDera(0, ders, 25.0, 25.0, 25.0, ((16.0, 0.0),))]
    shape = np.linspace(0.7, 1.0, horizon)
    loads = np.outer([0.0, 0.7, 0.3], shape * peak)
    total = loads.sum(axis=0)
    return NetworkCase("triangle", buses, lines, gens, mderas, loads, 0.05 * total, 0.03 * total)


def ring5_case(horizon: int = 6, peak: float = 220.0) -> NetworkCase:
    """5-bus ring with a chord, 4 generators and a 3-DER M-DERA."""
    buses = [Bus(i, i == 0) for i in range(5)]
    lines = [Line(0, 0, 1, 0.1, 80.0), Line(1, 1, 2, 0.1, 200.0), Line(2, 2, 3, 0.1, 200.0),
             Line(3, 3, 4, 0.1, 200.0), Line(4, 4, 0, 0.1, 200.0), Line(5, 1, 3, 0.2, 200.0)]
    gens = [
        Generator(0, 0, 20.0, 150.0, 80.0, 80.0, 3, 2, 300.0, 20.0, ((11.0, 100.0), (15.0, -100.0)),
                  sr_limit=40.0, initial_hours=6, initial_power=100.0),
        Generator(1, 2, 10.0, 60.0, 40.0, 40.0, 2, 2, 150.0, 10.0, ((22.0, 40.0),), sr_limit=30.0),
        Generator(2, 3, 10.0, 50.0, 50.0, 50.0, 1, 1, 80.0, 0.0, ((28.0, 30.0),), sr_limit=40.0),
        Generator(3, 4, 5.0, 40.0, 40.0, 40.0, 1, 1, 40.0, 0.0, ((45.0, 20.0),), sr_limit=40.0,
                  nr_limit=40.0, quick_start=True),
    ]
    ders = (Der(0, 1, 15.0, 18.0), Der(1, 3, 15.0, 12.0), Der(2, 4, 15.0, 7.0))
    mderas = [MDera(0, ders, 40.0, 40.0, 40.0, ((17.0, 0.0),))]
    shape = np.linspace(0.75, 1.0, horizon)
    loads = np.outer([0.0, 0.45, 0.2, 0.2, 0.15], shape * peak)
    total = loads.sum(axis=0)
    return NetworkCase("ring5", buses, lines, gens, mderas, loads, 0.05 * total, 0.03 * total)


def dirichlet_scenarios(case: NetworkCase, n: int, seed: int, alpha: float = 2.0) -> ScenarioSet:
    rng = np.random.default_rng(seed)
    dfs = [rng.dirichlet(np.full(m.size, alpha), (n, case.horizon)) for m in case.mderas]
    return ScenarioSet(dfs, np.full(n, 1.0 / n))


@pytest.fixture
def toy():
    return toy_case()


@pytest.fixture
def toy6():
    return toy_case(horizon=6)


# --- acceptance reporting: one PASS/FAIL line per criterion ---------------------

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    num, text = mark.args
    entry = _CRITERIA.setdefault(num, {"text": text, "passed": True, "tests": 0})
    if rep.when == "call":
        entry["tests"] += 1
    if rep.failed or (rep.skipped and rep.when == "call"):
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        verdict = "PASS" if e["passed"] and e["tests"] else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {verdict}: {e['text']} ({e['tests']} test(s))")
