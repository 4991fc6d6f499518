import numpy as np
import pytest

from asmd.data import generate_synthetic_lasso, build_lasso_problem

_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, title, passed, detail)``."""
    def _record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lasso_1000x10():
    data, x_true = generate_synthetic_lasso(1000, 10, 0)
    return build_lasso_problem(data, 0.1), data, x_true
