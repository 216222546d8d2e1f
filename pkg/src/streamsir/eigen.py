"""Incremental eigen-trackers for the slice kernel matrix.

Four interchangeable strategies maintain the top-d eigenpairs of the
p x p slice kernel while only ever being shown its p x H factor (and, for
the perturbation strategy alone, the dense matrix):

* ``ccipca``        covariance-free averaging of weighted samples, with
                    deflation between components.  O(pdH) per step, the
                    default and the only one that scales past p ~ 10^3.
* ``perturbation``  first-order eigenpair correction around the running
                    average of kernel matrices.  O(p^3 + p^2 d) per step;
                    kept as the accuracy yardstick at small p.
* ``sgd``           stochastic gradient ascent on the Rayleigh quotient
                    with a first-order deflation term; periodic
                    Gram-Schmidt repair.
* ``ipca``          rank-(d+1) incremental decomposition: project the new
                    factor column onto the current basis plus its residual
                    direction and re-solve a (d+1) x (d+1) problem.

All trackers are initialized from the same warmup statistics via a thin
SVD of the p x H factor, which equals the dense eigendecomposition of the
kernel matrix without materializing it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, DegenerateDataError

STRATEGIES = ("ccipca", "perturbation", "sgd", "ipca")

_NORM_FLOOR = 1e-12
# Shifts within this fraction of the largest one count as resonant and are
# excluded from the perturbation pseudo-inverse.  The tracked pair itself is
# always resonant once the tracker converges (its shift decays toward zero),
# and inverting it amplifies the per-step innovation enough to throw the
# vector onto a different eigenpair, so the tolerance is deliberately coarse.
_PINV_CUTOFF = 1e-3


@dataclass(frozen=True)
class TrackerConfig:
    strategy: str = "ccipca"
    sgd_rate_constant: float = 5.0  # step size C/t for the sgd strategy
    orthonormalize_every: int = 50  # sgd basis repair period

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}"
            )
        if self.sgd_rate_constant <= 0:
            raise ConfigurationError("sgd_rate_constant must be positive")
        if self.orthonormalize_every < 1:
            raise ConfigurationError("orthonormalize_every must be a positive integer")


class EigenTracker:
    """Top-d eigenpair state plus one strategy's update rule.

    Attributes
    ----------
    values : (d,) tracked eigenvalues, descending at init.
    vectors : (p, d) tracked eigenvectors, unit columns.
    raw_vectors : (p, d) unnormalized component vectors (ccipca only);
        the norm of column j doubles as its eigenvalue estimate.
    averaged_kernel : (p, p) running mean of dense kernel matrices
        (perturbation only).
    step : number of streaming updates applied.
    reinit_count : how often a collapsed ccipca component was re-seeded.
    """

    def __init__(
        self,
        values: np.ndarray,
        vectors: np.ndarray,
        config: TrackerConfig,
        averaged_kernel: np.ndarray | None = None,
    ):
        self.values = np.asarray(values, dtype=float).copy()
        self.vectors = np.asarray(vectors, dtype=float).copy()
        self.config = config
        self.step = 0
        self.reinit_count = 0
        self.raw_vectors = (
            self.vectors * self.values[None, :]
            if config.strategy == "ccipca"
            else None
        )
        if config.strategy == "perturbation":
            if averaged_kernel is None:
                raise ConfigurationError(
                    "perturbation strategy needs the dense kernel at init"
                )
            self.averaged_kernel = np.asarray(averaged_kernel, dtype=float).copy()
        else:
            self.averaged_kernel = None

    @property
    def n_directions(self) -> int:
        return self.values.size

    @classmethod
    def from_kernel(cls, kernel, d: int, config: TrackerConfig) -> "EigenTracker":
        """Initialize from warmup statistics.

        The top-d eigenpairs of (1/H) C C' are read off the thin SVD of the
        p x H factor C, so no p x p matrix is formed unless the strategy
        itself requires one.
        """
        factor = kernel.slice_cov
        p, n_slices = factor.shape
        if not 1 <= d <= min(p, n_slices):
            raise ConfigurationError(
                f"need 1 <= d <= min(p, H) = {min(p, n_slices)}, got {d}"
            )
        u, s, _ = np.linalg.svd(factor, full_matrices=False)
        values = s[:d] ** 2 / n_slices
        vectors = u[:, :d]
        if values[0] <= _NORM_FLOOR:
            raise DegenerateDataError(
                "slice kernel is numerically zero; covariates carry no "
                "between-slice signal in the warmup"
            )
        averaged = kernel.kernel_matrix() if config.strategy == "perturbation" else None
        return cls(values, vectors, config, averaged)

    # -- strategy updates -----------------------------------------------------

    def ccipca_step(self, factor: np.ndarray, t: int) -> None:
        """Candid covariance-free update from the new p x H factor.

        Component j receives the weighted-average update
        v <- t/(t+1) v + 1/(t+1) (1/H) W (W' v/|v|) on the j-times-deflated
        factor W.  Matrix-vector products keep the cost at O(pdH).  A
        component whose norm collapses below 1e-12 is re-seeded from the
        largest remaining deflated column and counted in ``reinit_count``.
        """
        w = np.asarray(factor, dtype=float)
        n_slices = w.shape[1]
        keep, blend = t / (t + 1.0), 1.0 / (t + 1.0)
        for j in range(self.n_directions):
            v = self.raw_vectors[:, j]
            norm = float(np.linalg.norm(v))
            if norm < _NORM_FLOOR:
                v = self._reseed_from(w)
                norm = float(np.linalg.norm(v))
                if norm < _NORM_FLOOR:
                    self.values[j] = 0.0
                    continue
            unit = v / norm
            v = keep * v + blend * (w @ (w.T @ unit)) / n_slices
            norm = float(np.linalg.norm(v))
            if norm < _NORM_FLOOR:
                v = self._reseed_from(w)
                norm = float(np.linalg.norm(v))
                if norm < _NORM_FLOOR:
                    self.raw_vectors[:, j] = v
                    self.values[j] = 0.0
                    continue
            self.raw_vectors[:, j] = v
            self.values[j] = norm
            unit = v / norm
            self.vectors[:, j] = unit
            if j + 1 < self.n_directions:
                w = w - np.outer(unit, unit @ w)
        self.step += 1

    def _reseed_from(self, w: np.ndarray) -> np.ndarray:
        self.reinit_count += 1
        col = int(np.argmax(np.linalg.norm(w, axis=0)))
        return w[:, col].copy()

    def perturbation_step(self, kernel_dense: np.ndarray, t: int) -> None:
        """First-order eigenpair correction around the running kernel mean.

        With A the current average and K the new dense kernel, each pair
        moves by -1/(t+1) times (v'(A - K)v for the value, and the
        pseudo-inverse of (lam I - A) applied to (A - K)v for the vector).
        One eigendecomposition of A per step makes every shifted
        pseudo-inverse an O(p^2) product; shifts within a small fraction
        of the largest are treated as singular and dropped, which covers
        the tracked pair's own direction once it has converged.
        """
        gap = self.averaged_kernel - np.asarray(kernel_dense, dtype=float)
        rate = 1.0 / (t + 1.0)
        base_vals, base_vecs = np.linalg.eigh(self.averaged_kernel)
        gv = gap @ self.vectors  # (p, d)
        new_values = self.values - rate * np.einsum("ij,ij->j", self.vectors, gv)
        new_vectors = np.empty_like(self.vectors)
        for j in range(self.n_directions):
            shifts = self.values[j] - base_vals
            cutoff = _PINV_CUTOFF * float(np.abs(shifts).max())
            inv = np.where(np.abs(shifts) > cutoff, 1.0, 0.0)
            inv = np.divide(inv, shifts, out=np.zeros_like(shifts), where=inv > 0)
            delta = base_vecs @ (inv * (base_vecs.T @ gv[:, j]))
            v = self.vectors[:, j] - rate * delta
            norm = float(np.linalg.norm(v))
            new_vectors[:, j] = v / norm if norm > _NORM_FLOOR else self.vectors[:, j]
        self.values = new_values
        self.vectors = new_vectors
        self.averaged_kernel -= rate * gap
        self.step += 1

    def sgd_step(self, factor: np.ndarray, t: int) -> None:
        """Stochastic gradient update with first-order deflation.

        Writing phi_j = W' v_j, the value moves toward phi_j'phi_j and the
        vector takes a gradient step along W phi_j minus the self and
        lower-component corrections (coefficient 2 on the latter).  Every
        ``orthonormalize_every`` steps the correction is replaced by an
        exact Gram-Schmidt pass.  Step size is C/(t+1).
        """
        w = np.asarray(factor, dtype=float)
        gamma = self.config.sgd_rate_constant / (t + 1.0)
        phi = w.T @ self.vectors  # (H, d)
        gram = phi.T @ phi  # (d, d)
        self.values = self.values + gamma * (np.diag(gram) - self.values)
        self.step += 1
        drive = w @ phi  # (p, d)
        if self.step % self.config.orthonormalize_every == 0:
            q, r = np.linalg.qr(self.vectors + gamma * drive)
            signs = np.sign(np.diag(r))
            signs[signs == 0] = 1.0
            self.vectors = q * signs[None, :]
        else:
            correction = self.vectors * np.diag(gram)[None, :]
            correction += 2.0 * (self.vectors @ np.triu(gram, k=1))
            self.vectors = self.vectors + gamma * (drive - correction)

    def ipca_step(self, factor: np.ndarray, y: float, slice_means: np.ndarray) -> int:
        """Incremental rank-(d+1) refresh driven by the nearest-mean slice.

        The new observation is attributed to the slice whose running mean
        response is closest to y (ties to the lower index, empty slices
        skipped).  That slice's factor column is split into its projection
        onto the current basis and a residual direction; the (d+1)-dim
        compressed kernel is re-solved exactly and the top d pairs kept.
        Returns the chosen slice so the caller can update its bookkeeping.
        """
        w = np.asarray(factor, dtype=float)
        n_slices = w.shape[1]
        means = np.asarray(slice_means, dtype=float)
        if means.size != n_slices:
            raise DataError("one running mean per slice is required")
        dist = np.abs(float(y) - means)
        dist[~np.isfinite(means)] = np.inf
        if not np.any(np.isfinite(dist)):
            raise DataError("no slice has a defined running mean")
        k = int(np.argmin(dist))

        col = w[:, k]
        resid = col - self.vectors @ (self.vectors.T @ col)
        norm = float(np.linalg.norm(resid))
        if norm >= _NORM_FLOOR:
            basis = np.hstack([self.vectors, (resid / norm)[:, None]])
        else:
            basis = self.vectors
        z = basis.T @ w  # (d+1, H) compressed factor
        small = z @ z.T / n_slices
        vals, vecs = np.linalg.eigh((small + small.T) / 2.0)
        order = np.argsort(vals)[::-1][: self.n_directions]
        self.values = vals[order]
        self.vectors = basis @ vecs[:, order]
        self.step += 1
        return k

    # -- shared helpers ---------------------------------------------------------

    def align_signs(self, reference: np.ndarray) -> None:
        """Flip column signs so each vector has non-negative overlap with
        its counterpart in ``reference`` (the previous step's basis)."""
        overlap = np.einsum("ij,ij->j", reference, self.vectors)
        flips = np.where(overlap < 0.0, -1.0, 1.0)
        self.vectors = self.vectors * flips[None, :]
        if self.raw_vectors is not None:
            self.raw_vectors = self.raw_vectors * flips[None, :]

    def state_arrays(self) -> dict:
        out = {
            "eigen_values": self.values,
            "eigen_vectors": self.vectors,
            "eigen_step": np.asarray(self.step),
            "eigen_reinit_count": np.asarray(self.reinit_count),
            "eigen_strategy": np.asarray(self.config.strategy),
            "eigen_sgd_rate_constant": np.asarray(self.config.sgd_rate_constant),
            "eigen_orthonormalize_every": np.asarray(self.config.orthonormalize_every),
        }
        if self.raw_vectors is not None:
            out["eigen_raw_vectors"] = self.raw_vectors
        if self.averaged_kernel is not None:
            out["eigen_averaged_kernel"] = self.averaged_kernel
        return out

    @classmethod
    def from_state_arrays(cls, arrays: dict) -> "EigenTracker":
        config = TrackerConfig(
            strategy=str(arrays["eigen_strategy"]),
            sgd_rate_constant=float(arrays["eigen_sgd_rate_constant"]),
            orthonormalize_every=int(arrays["eigen_orthonormalize_every"]),
        )
        tracker = cls(
            arrays["eigen_values"],
            arrays["eigen_vectors"],
            config,
            averaged_kernel=arrays.get("eigen_averaged_kernel"),
        )
        tracker.step = int(arrays["eigen_step"])
        tracker.reinit_count = int(arrays["eigen_reinit_count"])
        if "eigen_raw_vectors" in arrays:
            tracker.raw_vectors = np.asarray(
                arrays["eigen_raw_vectors"], dtype=float
            ).copy()
        return tracker
