import numpy as np
import pytest

from salestack import synth
from salestack.frame import prepare


@pytest.fixture(scope="session")
def synth_small():
    """A prepared 600-row synthetic frame with socio columns joined."""
    raw, socio, info = synth.generate(600, seed=7)
    frame, _ = prepare(raw, socio)
    return frame


@pytest.fixture(scope="session")
def synth_raw():
    return synth.generate(300, seed=3)


def random_xy(rng, n, d, levels=None, flip=0.1):
    """Feature matrix with optional coarse levels (to force ties) and noisy labels."""
    if levels:
        X = rng.integers(0, levels, size=(n, d)).astype(np.float64)
    else:
        X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    y = ((X - X.mean(axis=0)) @ w > 0).astype(np.int64)
    y ^= (rng.random(n) < flip).astype(np.int64)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return X, y


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion check")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[crit] = (report.outcome, report.duration, detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    word = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for (n, title), (outcome, dur, detail) in sorted(_CRITERIA.items()):
        line = f"criterion {n}: {word.get(outcome, outcome)}  {title} ({dur:.1f} s)"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
