import numpy as np
import pytest

ACCEPTANCE_KEY = pytest.StashKey[dict]()
N_CRITERIA = 10


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def report(request):
    """Record one acceptance line: ``report(number, title, passed, detail)``."""
    results = request.config.stash[ACCEPTANCE_KEY]

    def _report(number, title, passed, detail=""):
        results[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})")

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[ACCEPTANCE_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        if number in results:
            title, passed, detail = results[number]
            terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
        else:
            terminalreporter.write_line(f"criterion {number:2d} NOT RUN")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
