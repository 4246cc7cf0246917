import numpy as np
import pytest

_ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--paper-scale", action="store_true", default=False,
                     help="run the full-size synthetic experiment smoke test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--paper-scale"):
        return
    skip = pytest.mark.skip(reason="needs --paper-scale")
    for item in items:
        if "paper_scale" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one acceptance verdict line; the caller still asserts."""

    def record(name, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'} {name} {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
