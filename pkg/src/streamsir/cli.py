"""Command-line front end: simulate, fit, benchmark, sweep.

``streamsir simulate`` writes a synthetic regression stream to CSV,
``streamsir fit`` runs the streaming estimator over a CSV file,
``streamsir benchmark`` compares estimators over replicated simulations
and writes per-replication and aggregated reports, and ``streamsir
sweep`` grid-searches truncation hyperparameters on simulated data.

Benchmark method codes
----------------------
Each comparison method has a descriptive name and a short code; both
are accepted by ``--methods``:

========  ====================  ==============================================
code      name                  estimator
========  ====================  ==============================================
M1        sparse-perturbation   streaming sparse fit, perturbation tracker
M2        sparse-sgd            streaming sparse fit, stochastic-gradient tracker
M3        sparse-ccipca         streaming sparse fit, CCIPCA tracker
M4        sparse-ipca           streaming sparse fit, incremental-PCA tracker
M5        osir-perturbation     dense online SIR, perturbation tracker
M6        osir-sgd              dense online SIR, stochastic-gradient tracker
M7        batch-sir             classical batch SIR
M8        batch-lasso           batch lasso-penalized SIR
========  ====================  ==============================================
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import DenseOnlineSIR
from .batch import batch_lasso_sir, batch_sir
from .errors import ConfigurationError, DataError, StreamsirError
from .pipeline import OnlineSparseSIR, SIRConfig, fit_online
from .simulate import SimModelSpec, sample, subspace_distance, true_betas

DEFAULT_WARMUP = 100


@dataclass(frozen=True)
class MethodSpec:
    """One comparison method: how to fit it and what to call it."""

    name: str
    code: str
    kind: str  # "sparse" | "dense" | "batch-sir" | "batch-lasso"
    tracker: str | None = None


METHODS = (
    MethodSpec("sparse-perturbation", "M1", "sparse", "perturbation"),
    MethodSpec("sparse-sgd", "M2", "sparse", "sgd"),
    MethodSpec("sparse-ccipca", "M3", "sparse", "ccipca"),
    MethodSpec("sparse-ipca", "M4", "sparse", "ipca"),
    MethodSpec("osir-perturbation", "M5", "dense", "perturbation"),
    MethodSpec("osir-sgd", "M6", "dense", "sgd"),
    MethodSpec("batch-sir", "M7", "batch-sir"),
    MethodSpec("batch-lasso", "M8", "batch-lasso"),
)

_METHOD_LOOKUP = {m.name: m for m in METHODS} | {m.code.lower(): m for m in METHODS}


def resolve_methods(tokens):
    """Map user-supplied method names or codes to MethodSpec entries."""
    out = []
    for tok in tokens:
        key = tok.strip().lower()
        if key not in _METHOD_LOOKUP:
            valid = ", ".join(f"{m.code}/{m.name}" for m in METHODS)
            raise ConfigurationError(f"unknown method {tok!r}; valid methods: {valid}")
        spec = _METHOD_LOOKUP[key]
        if spec not in out:
            out.append(spec)
    return out


def benchmark_learning_rate(p):
    """Default streaming learning rate for benchmark runs.

    The library-wide default of 0.1/sqrt(p) is too aggressive for the
    coefficient update once p reaches the hundreds (the squared-error
    recursion needs a rate well below 1/trace of the covariate
    covariance to stay mean-square stable). The cap at 0.3/p keeps
    large-p runs stable while small p retains a fast rate.
    """
    return min(1e-3, 0.3 / p)


DEFAULT_GRAVITY = 3e-4


# ---------------------------------------------------------------------------
# benchmark


def _fit_one(method, X, y, n_slices, n_directions, gamma, gravity, theta, period, warmup):
    """Fit one method on one replication. Returns (directions, nonzeros)."""
    if method.kind == "sparse":
        cfg = SIRConfig(
            n_slices=n_slices,
            n_directions=n_directions,
            tracker=method.tracker,
            learning_rate=gamma,
            gravity=gravity,
            threshold=theta,
            period=period,
        )
        model = fit_online(X, y, cfg, warmup_size=warmup)
        return model.directions(), model.coef.nonzero_count()
    if method.kind == "dense":
        model = DenseOnlineSIR.warmup(
            X[:warmup],
            y[:warmup],
            n_slices=n_slices,
            n_directions=n_directions,
            tracker=method.tracker,
        )
        for i in range(warmup, X.shape[0]):
            model.observe(X[i], y[i])
        return model.directions(), None
    if method.kind == "batch-sir":
        return batch_sir(X, y, n_slices, n_directions), None
    betas = batch_lasso_sir(X, y, n_slices, n_directions)
    return betas, int(np.count_nonzero(np.any(betas != 0.0, axis=1)))


def run_benchmark_cell(method, model_id, p, n, n_slices, n_directions, gamma, gravity,
                       theta, period, warmup, master_seed, rep):
    """Run one (method, model, p, replication) cell.

    Data generation is seeded from (master, model, p, rep) only, so all
    methods see identical replication streams and comparisons are
    paired. The fit is timed; generation is not.
    """
    spec = SimModelSpec(model_id, p)
    d = n_directions if n_directions is not None else spec.n_directions
    g = gamma if gamma is not None else benchmark_learning_rate(p)
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, model_id, p, rep]))
    X, y = sample(spec, n, rng)
    truth = true_betas(spec)
    row = {
        "model": model_id, "p": p, "n": n, "H": n_slices, "d": d,
        "method": method.name, "code": method.code, "rep": rep,
        "distance": "NA", "seconds": "", "nonzeros": "", "error": "",
    }
    start = time.perf_counter()
    try:
        betas, nonzeros = _fit_one(method, X, y, n_slices, d, g, gravity, theta, period, warmup)
    except Exception as exc:  # noqa: BLE001 - cell failures become NA rows
        row["seconds"] = f"{time.perf_counter() - start:.6f}"
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row["seconds"] = f"{time.perf_counter() - start:.6f}"
    row["distance"] = f"{subspace_distance(truth, betas):.10f}"
    if nonzeros is not None:
        row["nonzeros"] = str(nonzeros)
    return row


def _cell_task(args):
    return run_benchmark_cell(*args)


_RESULT_FIELDS = ("model", "p", "n", "H", "d", "method", "code", "rep",
                  "distance", "seconds", "nonzeros", "error")
_SUMMARY_FIELDS = ("model", "p", "n", "H", "d", "method", "code", "reps", "ok",
                   "failed", "mean_distance", "sd_distance", "mean_seconds")


def _summarize(rows):
    """Aggregate per-replication rows into one summary row per cell."""
    cells = {}
    for r in rows:
        cells.setdefault((r["model"], r["p"], r["method"]), []).append(r)
    out = []
    for reps in cells.values():
        first = reps[0]
        dists = [float(r["distance"]) for r in reps if r["distance"] != "NA"]
        secs = [float(r["seconds"]) for r in reps if r["seconds"]]
        summary = {k: first[k] for k in ("model", "p", "n", "H", "d", "method", "code")}
        summary["reps"] = len(reps)
        summary["ok"] = len(dists)
        summary["failed"] = len(reps) - len(dists)
        summary["mean_distance"] = f"{np.mean(dists):.6f}" if dists else "NA"
        # a lone replication has no spread to report
        summary["sd_distance"] = f"{np.std(dists, ddof=1):.6f}" if len(dists) > 1 else ""
        summary["mean_seconds"] = f"{np.mean(secs):.6f}" if secs else "NA"
        out.append(summary)
    out.sort(key=lambda s: (s["model"], s["p"], s["code"]))
    return out


def _write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def _format_table(summaries, value_key):
    """Aligned per-model blocks: one row per p, one column per method."""
    lines = []
    models = sorted({s["model"] for s in summaries})
    for model_id in models:
        block = [s for s in summaries if s["model"] == model_id]
        methods = sorted({s["method"] for s in block},
                         key=lambda name: _METHOD_LOOKUP[name].code)
        ps = sorted({s["p"] for s in block})
        first = block[0]
        lines.append(f"model {model_id}  (n={first['n']}, H={first['H']}, "
                     f"d={first['d']}, reps={first['reps']})")
        widths = [max(len(m), 10) for m in methods]
        header = "  p".ljust(8) + "  ".join(m.rjust(w) for m, w in zip(methods, widths))
        lines.append(header)
        by_cell = {(s["p"], s["method"]): s for s in block}
        for p in ps:
            vals = []
            for m, w in zip(methods, widths):
                cell = by_cell.get((p, m))
                vals.append((cell[value_key] if cell else "NA").rjust(w))
            lines.append(f"  {p}".ljust(8) + "  ".join(vals))
        lines.append("")
    return "\n".join(lines)


def cmd_benchmark(args):
    methods = resolve_methods(args.methods.split(","))
    models = [int(tok) for tok in str(args.model).split(",")]
    ps = [int(tok) for tok in str(args.p).split(",")]
    if args.reps < 1:
        raise ConfigurationError("--reps must be at least 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [
        (method, model_id, p, args.n, args.H, args.d, args.gamma, args.gravity,
         args.theta, args.period, args.warmup, args.seed, rep)
        for model_id in models
        for p in ps
        for method in methods
        for rep in range(args.reps)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_cell_task, tasks, chunksize=1))
    else:
        rows = [_cell_task(t) for t in tasks]
    rows.sort(key=lambda r: (r["model"], r["p"], r["code"], r["rep"]))

    summaries = _summarize(rows)
    _write_csv(out_dir / "results.csv", _RESULT_FIELDS, rows)
    _write_csv(out_dir / "summary.csv", _SUMMARY_FIELDS, summaries)
    text = (_format_table(summaries, "mean_distance")
            + "\nmean seconds per replication\n\n"
            + _format_table(summaries, "mean_seconds"))
    (out_dir / "summary.txt").write_text("mean subspace distance\n\n" + text)
    print(f"wrote {out_dir / 'results.csv'}, summary.csv, summary.txt "
          f"({len(rows)} replication rows)")
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    spec = SimModelSpec(args.model, args.p, rho=args.rho, noise_sd=args.noise_sd)
    rng = np.random.default_rng(args.seed)
    X, y = sample(spec, args.n, rng)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(args.p)])
        for i in range(args.n):
            writer.writerow([f"{y[i]:.17g}"] + [f"{v:.17g}" for v in X[i]])
    print(f"wrote {args.n} rows, {args.p} covariates to {out}")
    return 0


# ---------------------------------------------------------------------------
# fit


def _read_stream_csv(path, target):
    """Load a header-plus-rows CSV into (X, y, covariate names).

    Raises DataError naming the offending line for short rows and
    non-numeric cells; an empty or header-only file is also an error.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        header = [c.strip() for c in header]
        if not any(header):
            raise DataError(f"{path}: empty file, expected a header row")
        if target not in header:
            raise DataError(f"{path}: no column named {target!r} in header {header}")
        y_col = header.index(target)
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} cells, found {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if not rows:
        raise DataError(f"{path}: 0 data rows after the header")
    data = np.asarray(rows, dtype=np.float64)
    y = data[:, y_col]
    X = np.delete(data, y_col, axis=1)
    names = [c for i, c in enumerate(header) if i != y_col]
    return X, y, names


def cmd_fit(args):
    X, y, names = _read_stream_csv(args.input, args.target)
    n, p = X.shape
    if n <= args.warmup:
        raise DataError(
            f"need more than {args.warmup} rows to warm up and stream, found {n}")
    gamma = args.gamma if args.gamma is not None else benchmark_learning_rate(p)
    cfg = SIRConfig(
        n_slices=args.H,
        n_directions=args.d,
        tracker=args.tracker,
        learning_rate=gamma,
        gravity=args.gravity,
        threshold=args.theta,
        period=args.period,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = OnlineSparseSIR.warmup(X[: args.warmup], y[: args.warmup], cfg)
    checkpoints = []

    def record(t):
        checkpoints.append({
            "t": t,
            "nonzeros": model.coef.nonzero_count(),
            "top_eigenvalue": f"{model.eigen.values[0]:.10g}",
            "reinits": model.eigen.reinit_count,
            "degenerate_responses": model.degenerate_responses,
        })

    record(args.warmup)
    for i in range(args.warmup, n):
        model.observe(X[i], y[i])
        t = i + 1
        if t % args.checkpoint_every == 0 or t == n:
            record(t)

    betas = model.directions()
    with open(out_dir / "directions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature"] + [f"dir{j + 1}" for j in range(betas.shape[1])])
        for name, coefs in zip(names, betas):
            writer.writerow([name] + [f"{v:.10g}" for v in coefs])
    _write_csv(out_dir / "checkpoints.csv",
               ("t", "nonzeros", "top_eigenvalue", "reinits", "degenerate_responses"),
               checkpoints)
    if args.save_model:
        model.save(out_dir / "model.npz")
    nnz = model.coef.nonzero_count()
    print(f"streamed {n - args.warmup} observations after warmup {args.warmup}; "
          f"{nnz}/{p} features active; wrote {out_dir / 'directions.csv'}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _parse_grid(text, flag):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"{flag}: {exc}") from None
    if not values:
        raise ConfigurationError(f"{flag}: grid is empty")
    return values


def cmd_sweep(args):
    spec = SimModelSpec(args.model, args.p)
    gammas = _parse_grid(args.gamma_grid, "--gamma-grid")
    gravities = _parse_grid(args.gravity_grid, "--gravity-grid")
    thetas = _parse_grid(args.theta_grid, "--theta-grid")
    if any(g <= 0 for g in gammas):
        raise ConfigurationError("--gamma-grid: learning rates must be positive")
    if any(g < 0 for g in gravities):
        raise ConfigurationError("--gravity-grid: gravity cannot be negative")

    d = args.d if args.d is not None else spec.n_directions
    rng = np.random.default_rng(args.seed)
    X, y = sample(spec, args.n, rng)
    truth = true_betas(spec)

    rows = []
    for gamma in gammas:
        for gravity in gravities:
            for theta in thetas:
                cfg = SIRConfig(
                    n_slices=args.H, n_directions=d, tracker=args.tracker,
                    learning_rate=gamma, gravity=gravity, threshold=theta,
                    period=args.period,
                )
                start = time.perf_counter()
                model = fit_online(X, y, cfg, warmup_size=args.warmup)
                rows.append({
                    "gamma": f"{gamma:g}", "gravity": f"{gravity:g}",
                    "theta": f"{theta:g}",
                    "distance": f"{subspace_distance(truth, model.directions()):.10f}",
                    "nonzeros": model.coef.nonzero_count(),
                    "seconds": f"{time.perf_counter() - start:.6f}",
                    "best": "",
                })
    best = min(rows, key=lambda r: float(r["distance"]))
    best["best"] = "*"
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ("gamma", "gravity", "theta", "distance", "nonzeros",
                     "seconds", "best"), rows)
    print(f"swept {len(rows)} settings; best distance {best['distance']} at "
          f"gamma={best['gamma']} gravity={best['gravity']} theta={best['theta']}; "
          f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# parser plumbing


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors also emit a machine-readable line."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "argument-error", "message": message}),
              file=sys.stderr)
        raise SystemExit(2)


def _add_truncation_flags(sub, with_tracker_default="ccipca"):
    sub.add_argument("--tracker", choices=("ccipca", "perturbation", "sgd", "ipca"),
                     default=with_tracker_default)
    sub.add_argument("--gamma", type=float, default=None,
                     help="coefficient learning rate (default: min(1e-3, 0.3/p))")
    sub.add_argument("--gravity", type=float, default=DEFAULT_GRAVITY,
                     help="truncation strength per step")
    sub.add_argument("--theta", type=float, default=math.inf,
                     help="truncation magnitude ceiling")
    sub.add_argument("--period", type=int, default=10,
                     help="steps between truncation passes")


def build_parser():
    parser = _Parser(prog="streamsir",
                     description="Streaming sparse sufficient dimension reduction.")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", parents=[], help="write a synthetic stream as CSV")
    sim.add_argument("--model", type=int, choices=(1, 2, 3), required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--rho", type=float, default=0.3)
    sim.add_argument("--noise-sd", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    fit = subs.add_parser("fit", help="stream a CSV file through the estimator")
    fit.add_argument("--input", required=True)
    fit.add_argument("--target", default="y", help="response column name")
    fit.add_argument("--H", type=int, default=10, help="slice count")
    fit.add_argument("--d", type=int, default=1, help="directions to estimate")
    fit.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    fit.add_argument("--checkpoint-every", type=int, default=200)
    fit.add_argument("--save-model", action="store_true")
    fit.add_argument("--out", required=True, help="output directory")
    _add_truncation_flags(fit)
    fit.set_defaults(func=cmd_fit)

    bench = subs.add_parser("benchmark", help="replicate the simulation comparison")
    bench.add_argument("--model", default="1", help="model id or comma list, e.g. 1,2")
    bench.add_argument("--p", default="20", help="dimension or comma list, e.g. 20,100")
    bench.add_argument("--n", type=int, default=1000)
    bench.add_argument("--H", type=int, default=10)
    bench.add_argument("--d", type=int, default=None,
                       help="directions (default: the model's own count)")
    bench.add_argument("--methods", default=",".join(m.name for m in METHODS),
                       help="comma list of method names or codes (M1..M8)")
    bench.add_argument("--reps", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--out", required=True, help="output directory")
    _add_truncation_flags(bench)
    bench.set_defaults(func=cmd_benchmark)

    sweep = subs.add_parser("sweep", help="grid-search truncation hyperparameters")
    sweep.add_argument("--model", type=int, choices=(1, 2, 3), required=True)
    sweep.add_argument("--p", type=int, required=True)
    sweep.add_argument("--n", type=int, default=1000)
    sweep.add_argument("--H", type=int, default=10)
    sweep.add_argument("--d", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    sweep.add_argument("--tracker", choices=("ccipca", "perturbation", "sgd", "ipca"),
                       default="ccipca")
    sweep.add_argument("--gamma-grid", default="0.001")
    sweep.add_argument("--gravity-grid", default="0.0003")
    sweep.add_argument("--theta-grid", default="inf")
    sweep.add_argument("--period", type=int, default=10)
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StreamsirError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io-error", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
