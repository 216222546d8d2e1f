"""Batch reference estimators: classical SIR and its sparse (lasso) variant.

These are the offline counterparts of the streaming pipeline.  They see the
whole sample at once, slice it by sorted response into (near-)equal-count
groups, and work with the between-slice mean matrix.  They serve two roles:
final-quality baselines in benchmarks, and ground truth for cross-checking
the streaming estimators in tests.

Conventions: X is (n, p) with one observation per row and is centered
internally.  n = c * H divisible slicing is the clean case; a remainder is
folded into the last slice.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DataError,
    DegenerateDataError,
)


def dense_top_eigen(S: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-d eigenpairs of a symmetric matrix, eigenvalues descending.

    Raises DataError if S is not (numerically) symmetric, so silent use on
    an unsymmetrized product is impossible.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.abs(S).max()) if S.size else 0.0)
    if float(np.abs(S - S.T).max()) > 1e-10 * scale:
        raise DataError("matrix is not symmetric")
    if not 1 <= d <= S.shape[0]:
        raise ConfigurationError(f"need 1 <= d <= {S.shape[0]}, got {d}")
    vals, vecs = np.linalg.eigh((S + S.T) / 2.0)
    order = np.argsort(vals)[::-1][:d]
    return vals[order], vecs[:, order]


def _slice_assignments(y: np.ndarray, n_slices: int) -> np.ndarray:
    """Slice label per observation: sort by y, split into equal-count groups.

    The first H-1 slices hold floor(n/H) observations each; any remainder
    joins the last slice.  Ties in y are resolved by stable sort order.
    """
    n = y.size
    if n < n_slices:
        raise ConfigurationError(f"{n} observations cannot fill {n_slices} slices")
    c = n // n_slices
    order = np.argsort(y, kind="stable")
    labels = np.empty(n, dtype=np.int64)
    for h in range(n_slices):
        hi = (h + 1) * c if h < n_slices - 1 else n
        labels[order[h * c: hi]] = h
    return labels


def _validate_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError("X must be (n, p) with one response per row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("inputs must be finite")
    return X, y


def slice_mean_matrix(X, y, n_slices: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centered slice means and memberships.

    Returns (M_H, labels, Xc): M_H is (p, H) whose column h is the mean of the
    centered covariates in slice h; labels is the per-row slice index; Xc the
    centered covariates.
    """
    X, y = _validate_xy(X, y)
    labels = _slice_assignments(y, n_slices)
    Xc = X - X.mean(axis=0)
    M = np.zeros((X.shape[1], n_slices))
    for h in range(n_slices):
        M[:, h] = Xc[labels == h].mean(axis=0)
    return M, labels, Xc


def sir_matrix(X, y, n_slices: int) -> np.ndarray:
    """Between-slice covariance estimate: (1/H) sum_h m_h m_h^T."""
    M, _, Xc = slice_mean_matrix(X, y, n_slices)
    scale = max(1.0, float(np.abs(Xc).max()) if Xc.size else 0.0)
    if float(np.abs(M).max()) <= 1e-12 * scale:
        raise DegenerateDataError(
            "all slice means vanish; between-slice covariance is zero"
        )
    G = M @ M.T / n_slices
    return (G + G.T) / 2.0


def batch_sir(X, y, n_slices: int, d: int) -> np.ndarray:
    """Classical sliced inverse regression directions, (p, d), unit columns.

    Solves the generalized eigenproblem G v = lam Cov(x) v for the top d
    eigenvectors.  When p >= n the sample covariance is singular and a small
    ridge (1e-6 * trace / p) is added; below that, a genuinely singular
    covariance raises rather than silently regularizing.
    """
    X, y = _validate_xy(X, y)
    n, p = X.shape
    if not 1 <= d <= min(p, n_slices):
        raise ConfigurationError(f"need 1 <= d <= min(p, H) = {min(p, n_slices)}")
    G = sir_matrix(X, y, n_slices)
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / n
    if p >= n:
        cov = cov + (1e-6 * np.trace(cov) / p) * np.eye(p)
    try:
        vals, vecs = scipy.linalg.eigh(G, cov)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        raise DegenerateDataError(
            "sample covariance is singular; not enough observations for p features"
        )
    order = np.argsort(vals)[::-1][:d]
    B = vecs[:, order]
    return B / np.linalg.norm(B, axis=0, keepdims=True)


# -- sparse variant -----------------------------------------------------------


def lasso_sir_targets(
    X, y, n_slices: int, d: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pseudo-response construction for the sparse batch estimator.

    Returns (targets, eta, lams, G):

    * ``G``       the between-slice covariance (p, p),
    * ``eta``     its top-d eigenvectors (p, d), ``lams`` the eigenvalues,
    * ``targets`` an (n, d) matrix whose row i is m_{h(i)}' eta / lam, the
      slice-mean projection of observation i's slice, one column per
      direction.

    Two identities tie the pieces together when n is a multiple of H:
    G @ eta == eta * lams and (1/n) Xc' targets == eta (up to roundoff).
    Regressing each target column on Xc therefore recovers a basis of the
    same subspace, and an l1 penalty on that regression yields sparse
    directions.
    """
    M, labels, Xc = slice_mean_matrix(X, y, n_slices)
    G = sir_matrix(X, y, n_slices)
    lams, eta = dense_top_eigen(G, d)
    if lams[min(d, lams.size) - 1] <= 1e-12:
        raise DegenerateDataError(
            "between-slice covariance has rank below the requested d"
        )
    proj = M.T @ eta / lams  # (H, d), row h is m_h' eta / lam
    targets = proj[labels]
    return targets, eta, lams, G


def lasso_coordinate_descent(
    X: np.ndarray,
    y: np.ndarray,
    penalty: float,
    *,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    beta0: np.ndarray | None = None,
) -> np.ndarray:
    """Cyclic coordinate descent for (1/2n) ||y - X b||^2 + penalty * ||b||_1.

    Runs until the duality gap drops below ``tol`` (for penalty 0, until the
    gradient's sup-norm does).  Raises ConvergenceError with the last gap if
    the sweep budget runs out.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if penalty < 0:
        raise ConfigurationError("penalty must be non-negative")
    col_sq = (X * X).sum(axis=0) / n
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    resid = y - X @ beta

    def gap() -> float:
        grad = X.T @ resid / n
        if penalty == 0.0:
            return float(np.abs(grad).max())
        # rescale the residual into the dual-feasible set, then primal - dual
        gmax = float(np.abs(grad).max())
        scale = 1.0 if gmax <= penalty else penalty / gmax
        theta = resid * (scale / n)
        primal = 0.5 * float(resid @ resid) / n + penalty * float(np.abs(beta).sum())
        dual = float(theta @ y) - 0.5 * n * float(theta @ theta)
        return primal - dual

    for _ in range(max_sweeps):
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = old * col_sq[j] + float(X[:, j] @ resid) / n
            new = np.sign(rho) * max(0.0, abs(rho) - penalty) / col_sq[j]
            if new != old:
                beta[j] = new
                resid += X[:, j] * (old - new)
        if gap() <= tol:
            return beta
    raise ConvergenceError(
        f"coordinate descent not converged after {max_sweeps} sweeps "
        f"(gap {gap():.3e}, tol {tol:.1e})"
    )


def batch_lasso_sir(
    X,
    y,
    n_slices: int,
    d: int,
    penalty=None,
    *,
    penalty_scale: float = 1.0,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> np.ndarray:
    """Sparse batch directions via l1-penalized regression on slice targets.

    ``penalty`` may be a scalar, one value per direction, or None, in which
    case direction i uses penalty_scale * sqrt(log(p) / (n * lam_i)).
    Returns the raw (p, d) sparse coefficient matrix; callers normalize if
    they need unit columns.
    """
    X, y = _validate_xy(X, y)
    n, p = X.shape
    if not 1 <= d <= min(p, n_slices):
        raise ConfigurationError(f"need 1 <= d <= min(p, H) = {min(p, n_slices)}")
    targets, eta, lams, _ = lasso_sir_targets(X, y, n_slices, d)
    if penalty is None:
        mus = penalty_scale * np.sqrt(np.log(p) / (n * lams))
    else:
        mus = np.broadcast_to(np.asarray(penalty, dtype=float), (d,)).copy()
    if np.any(mus < 0):
        raise ConfigurationError("penalties must be non-negative")
    Xc = X - X.mean(axis=0)
    B = np.empty((p, d))
    for i in range(d):
        B[:, i] = lasso_coordinate_descent(
            Xc, targets[:, i], float(mus[i]), tol=tol, max_sweeps=max_sweeps
        )
    return B
