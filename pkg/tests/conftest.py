import itertools
import math

import numpy as np
import pytest

from halfeig import Band, build_grid


def corner_oracle(M, band, which):
    """sup/inf of -tr(AM) over the corner matrices A = Q diag(a) Q^T,
    a_i in {gamma, Gamma}, Q the eigenbasis of M (numpy eigh)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    w, Q = np.linalg.eigh(M)
    vals = []
    for a in itertools.product((band.gamma, band.Gamma), repeat=M.shape[0]):
        A = Q @ np.diag(a) @ Q.T
        vals.append(-np.trace(A @ M))
    return max(vals) if which == "plus" else min(vals)


@pytest.fixture
def band12():
    return Band(1.0, 2.0)


@pytest.fixture(scope="session")
def pi_grid():
    return build_grid(1, 0.0, math.pi, 801)


@pytest.fixture(scope="session")
def unit_grid():
    return build_grid(1, 0.0, 1.0, 801)


# acceptance verdicts, filled by tests/test_acceptance.py and echoed in the summary
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {msg}")
