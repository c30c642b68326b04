import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from diagtele import qstate  # noqa: E402

_CRITERIA: list[str] = []


def random_probs(rng, n, sparsity=0.0):
    p = rng.dirichlet(np.ones(2 ** n))
    if sparsity:
        p[rng.random(2 ** n) < sparsity] = 0.0
        if p.sum() == 0:
            p[0] = 1.0
    return p / p.sum()


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@st.composite
def diagonal_states(draw, min_wires=1, max_wires=3):
    n = draw(st.integers(min_wires, max_wires))
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=2 ** n, max_size=2 ** n))
    w = np.array(weights)
    if w.sum() < 1e-6:
        w[0] = 1.0
    return qstate.make_diagonal(w / w.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record one acceptance line; printed again in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        line = f"AC{number:>2} {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
