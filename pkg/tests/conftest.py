import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_columns(rng, p, n):
    X = rng.normal(size=(p, n))
    return X / np.linalg.norm(X, axis=0)


def block_reachability(labels):
    labels = np.asarray(labels)
    return (labels[:, None] == labels[None, :]).astype(float)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``acceptance(num, ok, detail)`` records one criterion line for the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(num, ok, detail):
        lines.append((num, "PASS" if ok else "FAIL", detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  {detail}")
