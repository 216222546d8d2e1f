"""Shared fixtures and independent reference implementations.

The oracles here deliberately avoid the package's own code paths: slice
membership is decided by a scalar comparison loop, running statistics are
recomputed from the full stored sample, and eigenpairs come straight from
numpy's dense solvers.  Streaming results are compared against these.
"""

from __future__ import annotations

import numpy as np


def slice_index_oracle(y: float, cuts) -> int:
    """Right-closed slice lookup by plain comparison.

    Slice h covers (cuts[h-1], cuts[h]], open at both extremes, so an
    observation lands in slice h exactly when it exceeds h cut points.
    """
    h = 0
    for c in cuts:
        if y > c:
            h += 1
    return h


def slice_cov_oracle(X, y, cuts) -> np.ndarray:
    """(p, H) factor recomputed from the whole sample.

    Column h is (1/t) sum_i (x_i - xbar_t) 1{y_i in slice h} with xbar_t
    the mean of all t rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    t, p = X.shape
    n_slices = len(cuts) + 1
    xbar = X.mean(axis=0)
    C = np.zeros((p, n_slices))
    for i in range(t):
        h = slice_index_oracle(float(y[i]), cuts)
        C[:, h] += X[i] - xbar
    return C / t


def frozen_cov_oracle(X, y, cuts) -> np.ndarray:
    """Factor under arrival-time centering: row i is centered at the mean
    of rows 0..i and never re-centered afterwards."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    t, p = X.shape
    n_slices = len(cuts) + 1
    C = np.zeros((p, n_slices))
    running = np.zeros(p)
    for i in range(t):
        running += X[i]
        h = slice_index_oracle(float(y[i]), cuts)
        C[:, h] += X[i] - running / (i + 1)
    return C / t


def kernel_matrix_oracle(X, y, cuts) -> np.ndarray:
    C = slice_cov_oracle(X, y, cuts)
    K = C @ C.T / (len(cuts) + 1)
    return (K + K.T) / 2.0


def response_oracle(X, y, cuts, eta, lams) -> np.ndarray:
    """Regression target for the newest observation, recomputed batch-style.

    Takes the slice-factor column of the newest response, projects it on
    eta, and scales by 1/(t * H * lam) with t the total rows seen.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    t = X.shape[0]
    n_slices = len(cuts) + 1
    C = slice_cov_oracle(X, y, cuts)
    h = slice_index_oracle(float(y[-1]), cuts)
    proj = C[:, h] @ np.asarray(eta, dtype=float)
    return proj / (t * n_slices * np.asarray(lams, dtype=float))


def principal_angle(u, v) -> float:
    """Angle between two one-dimensional spans, in radians."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    c = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(1.0, c)))


def top_eigen_oracle(S, d: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Top-d eigenpairs of a symmetric matrix via the dense solver,
    eigenvalues descending."""
    vals, vecs = np.linalg.eigh(np.asarray(S, dtype=float))
    order = np.argsort(vals)[::-1][:d]
    return vals[order], vecs[:, order]


def random_stream(rng, t: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Generic regression stream with enough response spread to fill every
    slice of a modest grid."""
    X = rng.standard_normal((t, p))
    y = X[:, 0] + 0.5 * rng.standard_normal(t)
    return X, y
