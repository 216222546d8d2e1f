"""Dense streaming SIR baseline (no sparsity stage).

This is the comparison method the sparse pipeline is meant to beat in high
dimension: it tracks the same slice-kernel eigenvectors online but converts
them to directions through the inverse sample covariance instead of a sparse
regression.  Maintaining the covariance costs O(p^2) per observation and the
final solve is dense, so the estimate degrades sharply once p approaches the
sample size.

Only the perturbation and sgd trackers are offered here, matching the two
dense online variants used as benchmark opponents.
"""

from __future__ import annotations

import numpy as np

from .eigen import EigenTracker, TrackerConfig
from .errors import ConfigurationError, DataError
from .kernel import KernelTracker, SliceGrid


class DenseOnlineSIR:
    """Streaming SIR estimate: eigen-track the kernel, invert the covariance."""

    def __init__(
        self,
        kernel: KernelTracker,
        eigen: EigenTracker,
        xx_sum: np.ndarray,
        warmup_size: int,
    ):
        self.kernel = kernel
        self.eigen = eigen
        self.xx_sum = xx_sum  # running sum of x x', (p, p)
        self.warmup_size = int(warmup_size)

    @classmethod
    def warmup(
        cls,
        X,
        y,
        n_slices: int = 10,
        n_directions: int = 1,
        tracker: str = "perturbation",
        sgd_rate_constant: float = 5.0,
        orthonormalize_every: int = 50,
    ) -> "DenseOnlineSIR":
        if tracker not in ("perturbation", "sgd"):
            raise ConfigurationError(
                "dense online SIR supports only the perturbation and sgd trackers"
            )
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DataError("warmup X must be (n, p) with one response per row")
        if X.shape[0] < max(n_slices, 2):
            raise ConfigurationError("warmup batch too small for the slice grid")
        grid = SliceGrid.from_warmup(y, n_slices)
        kernel = KernelTracker(grid, X.shape[1])
        kernel.replay(X, y)
        eigen = EigenTracker.from_kernel(
            kernel,
            n_directions,
            TrackerConfig(
                strategy=tracker,
                sgd_rate_constant=sgd_rate_constant,
                orthonormalize_every=orthonormalize_every,
            ),
        )
        return cls(kernel, eigen, X.T @ X, X.shape[0])

    @property
    def t(self) -> int:
        return self.kernel.t

    def observe(self, x, y) -> "DenseOnlineSIR":
        x = np.asarray(x, dtype=float).ravel()
        self.kernel.update(x, y)
        t_prev = self.kernel.t - 1
        previous = self.eigen.vectors.copy()
        if self.eigen.config.strategy == "perturbation":
            self.eigen.perturbation_step(self.kernel.kernel_matrix(), t_prev)
        else:
            self.eigen.sgd_step(self.kernel.slice_cov, t_prev)
        self.eigen.align_signs(previous)
        self.xx_sum += np.outer(x, x)
        return self

    def directions(self) -> np.ndarray:
        """Covariance-weighted directions, (p, d), unit columns."""
        t = self.kernel.t
        mean = self.kernel.mean
        cov = self.xx_sum / t - np.outer(mean, mean)
        p = cov.shape[0]
        if p >= t:
            cov = cov + (1e-6 * np.trace(cov) / p) * np.eye(p)
        try:
            B = np.linalg.solve(cov, self.eigen.vectors)
        except np.linalg.LinAlgError:
            cov = cov + (1e-6 * np.trace(cov) / p) * np.eye(p)
            B = np.linalg.solve(cov, self.eigen.vectors)
        norms = np.linalg.norm(B, axis=0)
        good = norms > 0
        B[:, good] /= norms[good]
        return B
