import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qbm import config
from qbm.baths import BathSpec
from qbm.idf import OscillatorSpec

settings.register_profile("qbm", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=40)
settings.load_profile("qbm")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or convergence test")
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config.stash[_CRITERIA] = []


_CRITERIA = pytest.StashKey[list]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    item.config.stash[_CRITERIA].append((number, title, rep.passed, detail))


def pytest_terminal_summary(terminalreporter, config):
    rows = sorted(config.stash.get(_CRITERIA, []))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, ok, detail in rows:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number:2d}. {title}: {detail}")


@pytest.fixture(scope="session")
def default_cfg():
    return config.from_dict()


@pytest.fixture(scope="session")
def relaxing_cfg():
    return config.from_dict(preset="relaxing")


@pytest.fixture
def idf():
    return OscillatorSpec(1.0, 1.0)


@pytest.fixture
def bath_minus():
    return BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.05)


@pytest.fixture
def bath_plus():
    return BathSpec("ohmic_plus", 0.1, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
