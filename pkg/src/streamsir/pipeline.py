"""End-to-end streaming estimator.

One ``observe(x, y)`` call runs the full update chain:

1. slice-kernel statistics absorb the observation,
2. the eigen-tracker advances on the new factor (signs stabilized against
   the previous step so downstream targets never flip),
3. a d-vector artificial response is formed from the observation's slice,
4. the truncated-gradient stage takes one step toward regressing that
   response on x.

The sparse coefficient matrix of step 4 is the direction estimate.  Nothing
in the chain stores a p x p matrix unless the perturbation tracker is
selected, so the default configuration streams comfortably at p in the
thousands.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .eigen import STRATEGIES, EigenTracker, TrackerConfig
from .errors import ConfigurationError, DataError
from .kernel import KernelTracker, SliceGrid
from .simulate import subspace_distance
from .truncated import TruncatedGradient


@dataclass(frozen=True)
class SIRConfig:
    """Hyperparameters of the streaming estimator.

    ``learning_rate=None`` resolves to 0.1 / sqrt(p) at warmup.
    ``min_warmup=None`` resolves to 5 * n_slices.
    """

    n_slices: int = 10
    n_directions: int = 1
    tracker: str = "ccipca"
    learning_rate: float | None = None
    gravity: float = 0.0
    threshold: float = math.inf
    period: int = 10
    sgd_rate_constant: float = 5.0
    orthonormalize_every: int = 50
    min_warmup: int | None = None
    centering: str = "exact"
    eigenvalue_floor: float = 1e-12

    def __post_init__(self):
        if self.n_slices < 1:
            raise ConfigurationError("n_slices must be a positive integer")
        if self.n_directions < 1:
            raise ConfigurationError("n_directions must be a positive integer")
        if self.tracker not in STRATEGIES:
            raise ConfigurationError(
                f"unknown tracker {self.tracker!r}; choose from {STRATEGIES}"
            )
        if self.learning_rate is not None and not 0.0 < self.learning_rate < 1.0:
            raise ConfigurationError("learning_rate must lie in (0, 1)")
        if self.min_warmup is not None and self.min_warmup < 1:
            raise ConfigurationError("min_warmup must be a positive integer")
        if self.eigenvalue_floor <= 0:
            raise ConfigurationError("eigenvalue_floor must be positive")

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            strategy=self.tracker,
            sgd_rate_constant=self.sgd_rate_constant,
            orthonormalize_every=self.orthonormalize_every,
        )

    def resolve_rate(self, n_features: int) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 0.1 / math.sqrt(n_features)


class OnlineSparseSIR:
    """Streaming sparse sufficient-dimension-reduction model."""

    def __init__(
        self,
        kernel: KernelTracker,
        eigen: EigenTracker,
        coef: TruncatedGradient,
        config: SIRConfig,
        warmup_size: int,
        slice_y_sum: np.ndarray,
        slice_y_count: np.ndarray,
    ):
        self.kernel = kernel
        self.eigen = eigen
        self.coef = coef
        self.config = config
        self.warmup_size = int(warmup_size)
        self.slice_y_sum = np.asarray(slice_y_sum, dtype=float)
        self.slice_y_count = np.asarray(slice_y_count, dtype=np.int64)
        self.degenerate_responses = 0  # response coords dropped at the floor

    # -- construction -----------------------------------------------------------

    @classmethod
    def warmup(cls, X, y, config: SIRConfig = SIRConfig()) -> "OnlineSparseSIR":
        """Initialize every stage from a warmup batch.

        The batch fixes the slice cut points for the rest of the stream and
        supplies the eigen-tracker's starting basis, so it must hold at
        least max(n_slices, n_directions, min_warmup) observations.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DataError("warmup X must be (n, p) with one response per row")
        n0, p = X.shape
        need = max(
            config.n_slices,
            config.n_directions,
            config.min_warmup
            if config.min_warmup is not None
            else 5 * config.n_slices,
        )
        if n0 < need:
            raise ConfigurationError(
                f"warmup batch has {n0} observations, need at least {need}"
            )
        grid = SliceGrid.from_warmup(y, config.n_slices)
        kernel = KernelTracker(grid, p, centering=config.centering)
        kernel.replay(X, y)
        eigen = EigenTracker.from_kernel(
            kernel, config.n_directions, config.tracker_config()
        )
        coef = TruncatedGradient(
            p,
            config.n_directions,
            rate=config.resolve_rate(p),
            gravity=config.gravity,
            threshold=config.threshold,
            period=config.period,
        )
        slice_y_sum = np.zeros(config.n_slices)
        slice_y_count = np.zeros(config.n_slices, dtype=np.int64)
        for yi in y:
            h = grid.slice_of(yi)
            slice_y_sum[h] += yi
            slice_y_count[h] += 1
        return cls(kernel, eigen, coef, config, n0, slice_y_sum, slice_y_count)

    # -- streaming ---------------------------------------------------------------

    @property
    def t(self) -> int:
        return self.kernel.t

    @property
    def n_features(self) -> int:
        return self.kernel.n_features

    def observe(self, x, y) -> "OnlineSparseSIR":
        """Absorb one observation and advance every stage once."""
        self.kernel.update(x, y)
        t_prev = self.kernel.t - 1
        factor = self.kernel.slice_cov
        previous = self.eigen.vectors.copy()
        strategy = self.config.tracker
        if strategy == "ccipca":
            self.eigen.ccipca_step(factor, t_prev)
        elif strategy == "sgd":
            self.eigen.sgd_step(factor, t_prev)
        elif strategy == "perturbation":
            self.eigen.perturbation_step(self.kernel.kernel_matrix(), t_prev)
        else:  # ipca
            means = self._slice_means()
            k = self.eigen.ipca_step(factor, float(y), means)
            self.slice_y_sum[k] += float(y)
            self.slice_y_count[k] += 1
        self.eigen.align_signs(previous)
        response = self._response_from(factor, float(y), self.kernel.t)
        self.coef.update(x, response)
        return self

    def _slice_means(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(
                self.slice_y_count > 0,
                self.slice_y_sum / np.maximum(self.slice_y_count, 1),
                np.nan,
            )

    def _response_from(self, factor: np.ndarray, y: float, t: int) -> np.ndarray:
        # The extra 1/t anneals the target: its direction is fixed by the
        # slice statistics while its scale decays, so the coefficient stage
        # settles instead of rattling around a constant-variance floor.
        h = self.kernel.grid.slice_of(y)
        proj = factor[:, h] @ self.eigen.vectors  # (d,)
        floor = self.config.eigenvalue_floor
        lams = self.eigen.values
        clamped = np.maximum(lams, floor)
        response = proj / (t * self.kernel.grid.n_slices * clamped)
        dead = lams <= floor
        if np.any(dead):
            response = np.where(dead, 0.0, response)
            self.degenerate_responses += int(dead.sum())
        return response

    def artificial_response(self, y) -> np.ndarray:
        """The d-vector target the coefficient stage would regress on for a
        response ``y`` under the current state.  Pure read, no update."""
        saved = self.degenerate_responses
        out = self._response_from(self.kernel.slice_cov, float(y), self.kernel.t)
        self.degenerate_responses = saved
        return out

    # -- results ------------------------------------------------------------------

    @property
    def zero_direction_flags(self) -> np.ndarray:
        return np.linalg.norm(self.coef.betas, axis=0) == 0.0

    def directions(self, normalize: bool = True) -> np.ndarray:
        """Current direction estimate, (p, d).

        Columns are unit-normalized by default; an all-zero column (possible
        under heavy truncation) is returned as zeros and flagged through
        ``zero_direction_flags``.
        """
        B = self.coef.betas.copy()
        if normalize:
            norms = np.linalg.norm(B, axis=0)
            good = norms > 0
            B[:, good] /= norms[good]
        return B

    def check_counters(self) -> None:
        """Raise if the per-stage step counters drifted apart."""
        streamed = self.kernel.t - self.warmup_size
        if not (self.eigen.step == self.coef.step == streamed):
            raise AssertionError(
                f"stage counters disagree: kernel streamed {streamed}, "
                f"eigen {self.eigen.step}, coef {self.coef.step}"
            )

    # -- persistence ----------------------------------------------------------------

    def save(self, path) -> None:
        arrays = {}
        arrays.update(self.kernel.state_arrays())
        arrays.update(self.eigen.state_arrays())
        arrays.update(self.coef.state_arrays())
        cfg = asdict(self.config)
        arrays["pipe_config"] = np.asarray(json.dumps(cfg))
        arrays["pipe_warmup_size"] = np.asarray(self.warmup_size)
        arrays["pipe_slice_y_sum"] = self.slice_y_sum
        arrays["pipe_slice_y_count"] = self.slice_y_count
        arrays["pipe_degenerate_responses"] = np.asarray(self.degenerate_responses)
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "OnlineSparseSIR":
        with np.load(path, allow_pickle=False) as handle:
            arrays = {key: handle[key] for key in handle.files}
        raw = json.loads(str(arrays["pipe_config"]))
        raw["threshold"] = float(raw["threshold"])  # inf round-trips as Infinity
        config = SIRConfig(**raw)
        model = cls(
            KernelTracker.from_state_arrays(arrays),
            EigenTracker.from_state_arrays(arrays),
            TruncatedGradient.from_state_arrays(arrays),
            config,
            int(arrays["pipe_warmup_size"]),
            np.asarray(arrays["pipe_slice_y_sum"], dtype=float).copy(),
            np.asarray(arrays["pipe_slice_y_count"], dtype=np.int64).copy(),
        )
        model.degenerate_responses = int(arrays["pipe_degenerate_responses"])
        return model


def fit_stream(
    model: OnlineSparseSIR,
    X,
    y,
    progress=None,
    progress_every: int = 100,
    reference_directions=None,
) -> OnlineSparseSIR:
    """Feed a stream row by row, optionally reporting periodic diagnostics.

    ``progress`` receives a dict with the observation count, current
    eigenvalues, nonzero coefficient count, and (when reference directions
    are supplied) the subspace distance to them.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError("stream X must be (n, p) with one response per row")
    if progress_every < 1:
        raise ConfigurationError("progress_every must be a positive integer")
    for i in range(X.shape[0]):
        model.observe(X[i], y[i])
        if progress is not None and (i + 1) % progress_every == 0:
            info = {
                "t": model.t,
                "eigenvalues": model.eigen.values.copy(),
                "nonzeros": model.coef.nonzero_count(),
            }
            if reference_directions is not None:
                info["distance"] = subspace_distance(
                    reference_directions, model.directions()
                )
            progress(info)
    return model


def fit_online(
    X, y, config: SIRConfig = SIRConfig(), warmup_size: int = 100
) -> OnlineSparseSIR:
    """Convenience wrapper: warm up on the first rows, stream the rest."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if warmup_size >= X.shape[0]:
        raise ConfigurationError(
            f"warmup_size {warmup_size} leaves no observations to stream"
        )
    model = OnlineSparseSIR.warmup(X[:warmup_size], y[:warmup_size], config)
    return fit_stream(model, X[warmup_size:], y[warmup_size:])
