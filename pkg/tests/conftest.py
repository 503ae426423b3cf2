"""Independent brute-force oracles shared by the test modules."""

import itertools
import sys

import numpy as np
import pytest


def all_paths(p):
    """Every binary path for per-time probabilities ``p`` with its probability."""
    p = np.asarray(p, dtype=float)
    paths = np.array(list(itertools.product((0.0, 1.0), repeat=p.size)))
    probs = np.prod(np.where(paths == 1.0, p, 1 - p), axis=1)
    return paths, probs


def dense_hac(X, u, w, L):
    """HAC sandwich through an explicit n-by-n Bartlett kernel matrix."""
    n = X.shape[0]
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    Q = np.where(lags <= L, 1.0 - lags / (L + 1.0), 0.0)
    G = np.linalg.inv(X.T @ X)
    meat = X.T @ np.diag(u) @ Q @ np.diag(u) @ X
    Winv = np.diag(1.0 / np.asarray(w))
    return n * Winv @ G @ meat @ G @ Winv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when that module ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in mod.TITLES.items():
        checks = mod.RESULTS.get(n)
        if not checks:
            terminalreporter.write_line(f"criterion {n:2d} NOT RUN  {title}")
            continue
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}     {title}")
        for ok, detail in checks:
            terminalreporter.write_line(f"    [{'ok' if ok else 'fail'}] {detail}")
