"""Online l1-style coefficient estimation by gradient descent with
periodic truncation.

Each direction keeps a coefficient vector updated by plain least-mean-squares
steps; every ``period`` steps the coordinates are pulled toward zero by
``gravity * rate * period`` and clipped to exactly zero when they land inside
that band (coordinates beyond ``threshold`` are exempt).  Over many steps this
behaves like an l1 penalty of strength gravity/2 on the squared-error loss
while touching only O(p) memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError


def truncate(v, shrink: float, threshold: float = math.inf):
    """Pull values toward zero by ``shrink``, zeroing the band [-shrink, shrink].

    For 0 <= v <= threshold returns max(0, v - shrink); for
    -threshold <= v < 0 returns min(0, v + shrink); values beyond the
    threshold in magnitude pass through untouched.  Works elementwise on
    arrays and preserves scalar inputs.
    """
    if shrink < 0:
        raise ConfigurationError("shrink amount must be non-negative")
    if threshold < 0:
        raise ConfigurationError("threshold must be non-negative")
    arr = np.asarray(v, dtype=float)
    pulled = np.sign(arr) * np.maximum(0.0, np.abs(arr) - shrink)
    out = np.where(np.abs(arr) <= threshold, pulled, arr)
    if np.isscalar(v) or arr.ndim == 0:
        return float(out)
    return out


class TruncatedGradient:
    """Streaming sparse linear fit of d targets on a shared covariate vector.

    Parameters
    ----------
    n_features, n_targets : coefficient matrix shape (p, d).
    rate : gradient step size (gamma).  Must lie in (0, 1).
    gravity : per-step truncation strength (g); 0 disables truncation.
    threshold : coordinates above this magnitude are never truncated.
    period : truncation runs every ``period`` steps with the accumulated
        shrink gravity * rate * period.

    Coefficients start at zero.  One ``update(x, targets)`` call performs,
    in order: the step counter increment, truncation when the counter is a
    multiple of ``period``, then one gradient step
    b_j += 2 * rate * (target_j - b_j' x) * x for every target j.
    """

    def __init__(
        self,
        n_features: int,
        n_targets: int = 1,
        *,
        rate: float,
        gravity: float = 0.0,
        threshold: float = math.inf,
        period: int = 10,
    ):
        if n_features < 1 or n_targets < 1:
            raise ConfigurationError("need at least one feature and one target")
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError(f"rate must lie in [0, 1), got {rate}")
        if gravity < 0:
            raise ConfigurationError("gravity must be non-negative")
        if threshold < 0:
            raise ConfigurationError("threshold must be non-negative")
        if period < 1:
            raise ConfigurationError("period must be a positive integer")
        self.n_features = int(n_features)
        self.n_targets = int(n_targets)
        self.rate = float(rate)
        self.gravity = float(gravity)
        self.threshold = float(threshold)
        self.period = int(period)
        self.betas = np.zeros((n_features, n_targets))
        self.step = 0
        self.truncation_zeros = 0  # coordinates zeroed across all truncations

    def clone_unfitted(self, gravity: float | None = None) -> "TruncatedGradient":
        return TruncatedGradient(
            self.n_features,
            self.n_targets,
            rate=self.rate,
            gravity=self.gravity if gravity is None else gravity,
            threshold=self.threshold,
            period=self.period,
        )

    def update(self, x, targets) -> None:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n_features:
            raise DataError(
                f"expected covariate vector of length {self.n_features}, got {x.size}"
            )
        targets = np.asarray(targets, dtype=float).ravel()
        if targets.size != self.n_targets:
            raise DataError(
                f"expected {self.n_targets} targets, got {targets.size}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(targets))):
            raise DataError("inputs must be finite")

        self.step += 1
        if self.gravity > 0.0 and self.step % self.period == 0:
            before = np.count_nonzero(self.betas)
            self.betas = truncate(
                self.betas, self.gravity * self.rate * self.period, self.threshold
            )
            self.truncation_zeros += before - np.count_nonzero(self.betas)
        predicted = self.betas.T @ x  # (d,)
        self.betas += (2.0 * self.rate) * np.outer(x, targets - predicted)

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.betas))

    def state_arrays(self) -> dict:
        return {
            "coef_betas": self.betas,
            "coef_step": np.asarray(self.step),
            "coef_truncation_zeros": np.asarray(self.truncation_zeros),
            "coef_rate": np.asarray(self.rate),
            "coef_gravity": np.asarray(self.gravity),
            "coef_threshold": np.asarray(self.threshold),
            "coef_period": np.asarray(self.period),
        }

    @classmethod
    def from_state_arrays(cls, arrays: dict) -> "TruncatedGradient":
        betas = np.asarray(arrays["coef_betas"], dtype=float)
        model = cls(
            betas.shape[0],
            betas.shape[1],
            rate=float(arrays["coef_rate"]),
            gravity=float(arrays["coef_gravity"]),
            threshold=float(arrays["coef_threshold"]),
            period=int(arrays["coef_period"]),
        )
        model.betas = betas.copy()
        model.step = int(arrays["coef_step"])
        model.truncation_zeros = int(arrays["coef_truncation_zeros"])
        return model


@dataclass(frozen=True)
class PathEntry:
    gravity: float
    model: TruncatedGradient
    nonzeros: int
    mean_squared_error: float


def regularization_path(
    template: TruncatedGradient, stream, gravities
) -> list[PathEntry]:
    """Fit one fresh model per gravity value on a shared replayed stream.

    ``stream`` is a sequence of (x, targets) pairs; it is materialized once
    so every gravity sees identical data.  Returns one entry per gravity in
    the given order with the fitted model, its nonzero count, and the mean
    squared prediction error measured along the stream (prediction before
    each update).
    """
    gravities = list(gravities)
    if not gravities:
        raise ConfigurationError("need at least one gravity value")
    if any(g < 0 for g in gravities):
        raise ConfigurationError("gravities must be non-negative")
    pairs = [(np.asarray(x, dtype=float), np.asarray(t, dtype=float)) for x, t in stream]
    if not pairs:
        raise ConfigurationError("stream is empty")
    entries = []
    for g in gravities:
        model = template.clone_unfitted(gravity=g)
        sq_err = 0.0
        for x, targets in pairs:
            resid = np.ravel(targets) - model.betas.T @ np.ravel(x)
            sq_err += float(resid @ resid)
            model.update(x, targets)
        entries.append(
            PathEntry(
                gravity=float(g),
                model=model,
                nonzeros=model.nonzero_count(),
                mean_squared_error=sq_err / len(pairs),
            )
        )
    return entries
