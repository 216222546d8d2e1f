"""Streaming slice statistics for sliced inverse regression.

The central object is a p x H cross-covariance between the covariate vector
and a one-hot slice indicator of the response: column h estimates
E[(x - E x) 1{y in slice h}].  Everything a batch SIR pass would compute from
the first t observations is recoverable from three running aggregates (count,
covariate sum, covariate-by-slice sum), so a single pass over the stream is
enough and each update costs O(pH).

Slice boundaries are frozen after warmup: cut points are empirical quantiles
of the warmup responses and never move again.  Intervals are right-closed,
(q_{h-1}, q_h].
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    DegenerateDataError,
    EmptyStateError,
)


def _as_response(y) -> float:
    y = float(y)
    if not np.isfinite(y):
        raise DataError(f"response must be finite, got {y!r}")
    return y


class SliceGrid:
    """Fixed response-space partition into H slices.

    Parameters
    ----------
    cuts : array of shape (H - 1,)
        Strictly increasing interior cut points.  The outer boundaries are
        implicitly -inf and +inf.

    The grid also keeps a per-slice observation count so downstream
    consumers can recover slice frequencies without touching the stream.
    """

    def __init__(self, cuts: np.ndarray):
        cuts = np.asarray(cuts, dtype=float).ravel()
        if cuts.size and not np.all(np.diff(cuts) > 0):
            raise ConfigurationError("cut points must be strictly increasing")
        if cuts.size and not np.all(np.isfinite(cuts)):
            raise DataError("cut points must be finite")
        self.cuts = cuts
        self.counts = np.zeros(cuts.size + 1, dtype=np.int64)

    @property
    def n_slices(self) -> int:
        return self.counts.size

    @classmethod
    def from_warmup(cls, y, n_slices: int, allow_collapse: bool = False) -> "SliceGrid":
        """Build a grid from warmup responses.

        Cut points are the interior empirical quantiles at levels
        1/H, ..., (H-1)/H with the usual linear (midpoint-style)
        interpolation.  Duplicate quantiles mean the warmup responses
        cannot support H distinct slices; that raises unless
        ``allow_collapse`` is set, in which case duplicates are dropped
        and the grid ends up with fewer slices.
        """
        y = np.asarray(y, dtype=float).ravel()
        if n_slices < 1:
            raise ConfigurationError(f"need at least one slice, got {n_slices}")
        if y.size < n_slices:
            raise ConfigurationError(
                f"warmup has {y.size} responses, fewer than {n_slices} slices"
            )
        if not np.all(np.isfinite(y)):
            raise DataError("warmup responses must be finite")
        levels = np.arange(1, n_slices) / n_slices
        cuts = np.quantile(y, levels) if levels.size else np.empty(0)
        if np.unique(cuts).size != cuts.size:
            if not allow_collapse:
                raise DegenerateDataError(
                    "duplicate quantiles in warmup responses; "
                    "fewer distinct values than requested slices"
                )
            cuts = np.unique(cuts)
        return cls(cuts)

    def slice_of(self, y) -> int:
        """Index of the slice containing ``y`` (right-closed intervals)."""
        y = _as_response(y)
        # number of cuts strictly below y; ties go to the lower slice
        return int(np.searchsorted(self.cuts, y, side="left"))

    def indicator(self, y) -> np.ndarray:
        """One-hot slice membership vector of length H."""
        e = np.zeros(self.n_slices)
        e[self.slice_of(y)] = 1.0
        return e


class KernelTracker:
    """Running sufficient statistics for the slice kernel matrix.

    Maintains, over the first t observations:

    * ``t``            observation count,
    * ``x_sum``        sum of covariate vectors (p,),
    * ``cross_sum``    sum of x e(y)^T where e is the one-hot slice
                       indicator (p, H).

    ``slice_cov`` re-centers on demand: column h is
    (cross_sum[:, h] - counts[h] * mean) / t, which equals the batch
    quantity (1/t) sum_i (x_i - mean_t) 1{y_i in slice h} exactly.  This is
    the default "exact" centering.  ``centering="frozen"`` additionally
    keeps the cheaper historical-centering recursion, where each incoming
    x is centered at the mean current at its arrival and never re-centered;
    it is retained only for fidelity comparisons and is not the default.
    """

    def __init__(self, grid: SliceGrid, n_features: int, centering: str = "exact"):
        if n_features < 1:
            raise ConfigurationError(f"need at least one feature, got {n_features}")
        if centering not in ("exact", "frozen"):
            raise ConfigurationError(f"unknown centering mode {centering!r}")
        self.grid = grid
        self.n_features = int(n_features)
        self.centering = centering
        self.t = 0
        self.x_sum = np.zeros(n_features)
        self.cross_sum = np.zeros((n_features, grid.n_slices))
        self.frozen_sum = (
            np.zeros((n_features, grid.n_slices)) if centering == "frozen" else None
        )
        self.dense_builds = 0  # how many times a p x p matrix was materialized

    # -- updates ------------------------------------------------------------

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n_features:
            raise DataError(
                f"expected covariate vector of length {self.n_features}, got {x.size}"
            )
        if not np.all(np.isfinite(x)):
            raise DataError("covariates must be finite")
        return x

    def update(self, x, y) -> None:
        """Absorb one observation.  O(pH) time, no p x p allocation."""
        x = self._check_x(x)
        h = self.grid.slice_of(y)
        self.t += 1
        self.x_sum = self.x_sum + x
        self.cross_sum[:, h] += x
        self.grid.counts[h] += 1
        if self.frozen_sum is not None:
            # center at the mean as of this arrival; never re-centered
            self.frozen_sum[:, h] += x - self.x_sum / self.t

    def replay(self, X, y) -> None:
        """Absorb a batch row by row (order does not affect the aggregates)."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DataError("X must be (n, p) with one response per row")
        for xi, yi in zip(X, y):
            self.update(xi, yi)

    # -- derived quantities ---------------------------------------------------

    @property
    def mean(self) -> np.ndarray:
        if self.t == 0:
            return np.zeros(self.n_features)
        return self.x_sum / self.t

    @property
    def slice_cov(self) -> np.ndarray:
        """Centered slice cross-covariance, p x H.

        Column h is the sample covariance between x and the indicator of
        slice h (up to the t/(t-1) convention; we divide by t).
        """
        if self.t == 0:
            raise EmptyStateError("slice statistics requested before any observation")
        if self.frozen_sum is not None:
            return self.frozen_sum / self.t
        return (self.cross_sum - np.outer(self.mean, self.grid.counts)) / self.t

    def kernel_matrix(self) -> np.ndarray:
        """Dense p x p slice kernel: (1/H) sum_h c_h c_h^T, exactly symmetric."""
        if self.t == 0:
            raise EmptyStateError("kernel matrix requested before any observation")
        c = self.slice_cov
        self.dense_builds += 1
        k = c @ c.T / self.grid.n_slices
        return (k + k.T) / 2.0

    # -- persistence ----------------------------------------------------------

    def state_arrays(self) -> dict:
        out = {
            "kernel_t": np.asarray(self.t),
            "kernel_x_sum": self.x_sum,
            "kernel_cross_sum": self.cross_sum,
            "grid_cuts": self.grid.cuts,
            "grid_counts": self.grid.counts,
            "kernel_centering": np.asarray(self.centering),
        }
        if self.frozen_sum is not None:
            out["kernel_frozen_sum"] = self.frozen_sum
        return out

    @classmethod
    def from_state_arrays(cls, arrays: dict) -> "KernelTracker":
        grid = SliceGrid(arrays["grid_cuts"])
        grid.counts = np.asarray(arrays["grid_counts"], dtype=np.int64).copy()
        centering = str(arrays["kernel_centering"])
        tracker = cls(grid, int(np.asarray(arrays["kernel_x_sum"]).size), centering)
        tracker.t = int(arrays["kernel_t"])
        tracker.x_sum = np.asarray(arrays["kernel_x_sum"], dtype=float).copy()
        tracker.cross_sum = np.asarray(arrays["kernel_cross_sum"], dtype=float).copy()
        if centering == "frozen":
            tracker.frozen_sum = np.asarray(
                arrays["kernel_frozen_sum"], dtype=float
            ).copy()
        return tracker
