"""Shared test utilities: random problem instances and dense brute-force oracles."""

from __future__ import annotations

import numpy as np

from fluidsolve import SparseColumnMatrix


def random_substochastic(rng: np.random.Generator, n: int, density: float = 0.6,
                         max_col_sum: float = 0.95):
    """Random nonnegative matrix with every column L1 sum in (0, max_col_sum].

    Returns (SparseColumnMatrix, dense ndarray) so tests can run both routes.
    """
    dense = rng.random((n, n)) * (rng.random((n, n)) < density)
    sums = dense.sum(axis=0)
    targets = rng.uniform(0.2, max_col_sum, size=n)
    for j in range(n):
        if sums[j] > 0.0:
            dense[:, j] *= targets[j] / sums[j]
    return SparseColumnMatrix.from_dense(dense), dense


def random_signed_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, n)


def dense_matvec(dense: np.ndarray, v: np.ndarray) -> np.ndarray:
    """O(n^2) brute-force multiply, the oracle for the sparse kernel."""
    n = dense.shape[0]
    out = np.zeros(n)
    for i in range(n):
        for j in range(n):
            out[i] += dense[i, j] * v[j]
    return out


def fit_log_slope(residuals, first: int, last: int) -> float:
    """Least-squares slope of log(residual) against iteration over [first, last]."""
    xs = np.arange(first, last + 1, dtype=float)
    ys = np.log([residuals[k] for k in range(first, last + 1)])
    a = np.vstack([xs, np.ones_like(xs)]).T
    slope, _ = np.linalg.lstsq(a, ys, rcond=None)[0]
    return float(slope)


def read_trace_csv(path):
    """Parse rows of a 'step,residual_l1,cancelled,contracted' CSV."""
    lines = path.read_text().splitlines()
    assert lines[0] == "step,residual_l1,cancelled,contracted"
    rows = []
    for line in lines[1:]:
        step, resid, cancelled, contracted = line.split(",")
        rows.append((int(step), float(resid), float(cancelled), float(contracted)))
    return rows
