import numpy as np
import pytest

from lfen import catalog
from lfen.games import LeaderFollowerInstance


@pytest.fixture
def coord():
    return catalog.coordination()


@pytest.fixture
def mp():
    return catalog.matching_pennies()


@pytest.fixture
def mp_nf():
    """G-MP written out as a normal-form game."""
    return LeaderFollowerInstance(catalog.matching_pennies().game.to_normal_form())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, m):
    return rng.dirichlet(np.ones(m))


def pytest_configure(config):
    config.criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        item.config.criteria.append((mark.args[0], rep.passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not config.criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(config.criteria):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
