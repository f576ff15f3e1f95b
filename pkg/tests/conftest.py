from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from seqmct.experiments import PI_TARGET, Q_BAD, Q_GOOD
from seqmct.markov import make_rng, random_kernel, validate_kernel

settings.register_profile("seqmct", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("seqmct")


@pytest.fixture
def qbad():
    return validate_kernel(Q_BAD, "qbad")


@pytest.fixture
def qgood():
    return validate_kernel(Q_GOOD, "qgood")


@pytest.fixture
def pi_target():
    return PI_TARGET.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def kernels(n, seed=0, m_lo=2, m_hi=8):
    """``n`` random ergodic kernels with sizes in ``[m_lo, m_hi]``."""
    rng = make_rng(seed)
    out = []
    for _ in range(n):
        m = int(rng.integers(m_lo, m_hi + 1))
        out.append(random_kernel(m, rng))
    return out


# acceptance criteria report ---------------------------------------------------

ACCEPTANCE: dict = {}


def record_criterion(number: int, title: str, ok: bool, detail: str):
    """Store and print one pass/fail line; the caller asserts ``ok`` afterwards."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
