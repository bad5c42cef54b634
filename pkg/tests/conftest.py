import numpy as np
import pytest

from mallows_consensus import GMModel, Permutation, QMatrix, q_matrix
from mallows_consensus.model import sample_orders


def random_q(n, rng):
    """Q with independent uniform upper-triangle entries."""
    upper = np.triu(rng.random((n, n)), k=1)
    return QMatrix(upper + np.tril(1.0 - upper.T, k=-1))


def sampled_q(n, rng, theta=None, N=None):
    """Q of a Mallows sample around a random center; returns (Q, center)."""
    pi0 = Permutation(tuple(rng.permutation(n).tolist()))
    if theta is None:
        theta = rng.uniform(0.05, 2.0, size=n - 1)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (n - 1,))
    if N is None:
        N = int(rng.integers(5, 200))
    model = GMModel(pi0, tuple(theta.tolist()))
    return q_matrix(sample_orders(model, N, rng)), pi0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def running_example():
    """Three rankings of three items: (1 2 3) twice and (2 1 3)."""
    return [Permutation.from_items(x) for x in ((1, 2, 3), (1, 2, 3), (2, 1, 3))]


# -- acceptance reporting ---------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" and not report.failed:
        return
    for marker in item.iter_markers("criterion"):
        number, title = marker.args
        prev = _CRITERIA.get(number)
        failed = report.failed or (prev is not None and prev[1] == "FAIL")
        seconds = report.duration + (prev[2] if prev else 0.0)
        _CRITERIA[number] = (title, "FAIL" if failed else "PASS", seconds)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, seconds = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}  ({seconds:.1f}s)")
