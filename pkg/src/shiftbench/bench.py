"""Monte-Carlo benchmark harness for the shift estimators.

A sweep crosses truth images, SNR levels, frame counts, and estimator
method triples, running a fixed number of seeded trials per cell. Trial
seeds are derived from everything in the cell key except the method, so
competing methods score identical noise realizations (paired
comparison). Every cell reports mean MSE with a Student-t 95% interval
plus the bias-squared/variance split of the error.
"""

from __future__ import annotations

import csv
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from shiftbench.estimators import (
    EstimatorConfig,
    estimate_constrained,
    estimate_map,
    estimate_mle_ccd,
    estimate_mle_vp,
)
from shiftbench.fileio import read_image
from shiftbench.prior import PriorSpectrum, fit_prior_amplitude, wiener_filter
from shiftbench.spectral import wrap_shift
from shiftbench.synth import (
    TrajectoryModel,
    draw_shifts,
    make_stack,
    prepare_truth,
    sigma_for_snr_db,
)

__all__ = [
    "CSV_HEADER",
    "CellResult",
    "SweepResult",
    "SweepSpec",
    "TrialResult",
    "emit_csv",
    "emit_plot_script",
    "knee_snr_db",
    "load_csv",
    "resolve_workers",
    "run_sweep",
    "run_trial",
    "stable_seed",
    "trial_stack",
]

CSV_HEADER = (
    "truth,snr_db,k,method,optimizer,init,"
    "mse_mean,ci_lo,ci_hi,bias_sq,variance,converged_frac,wall_s"
)

_METHOD_NAMES = ("mle", "map", "constrained")

# keeps Wiener weights defined when a trial is noiseless
_MIN_PRIOR_NOISE = 1e-30


def stable_seed(*parts) -> int:
    """Deterministic 64-bit seed from the reprs of the given parts."""
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class SweepSpec:
    """Full description of one benchmark sweep."""

    truth_images: tuple
    snr_grid_db: tuple
    k_values: tuple
    methods: tuple
    trajectory: TrajectoryModel
    trials: int = 100
    base_seed: int = 0

    def __post_init__(self):
        if not self.truth_images:
            raise ValueError("truth_images must be nonempty")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must be nonempty")
        if not self.k_values or any(int(k) < 1 for k in self.k_values):
            raise ValueError("k_values must be nonempty with every k >= 1")
        if self.trials < 2:
            raise ValueError("trials must be >= 2")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for triple in self.methods:
            if len(triple) != 3:
                raise ValueError("each method is a (method, optimizer, init) triple")
            method, optimizer, init = triple
            if method not in _METHOD_NAMES:
                raise ValueError(f"method must be one of {_METHOD_NAMES}")
            if method == "constrained":
                if optimizer or init:
                    raise ValueError(
                        "constrained takes no optimizer or init; use empty strings"
                    )
            else:
                EstimatorConfig(method=method, optimizer=optimizer, init=init)


@dataclass(frozen=True)
class TrialResult:
    """Wrapped per-frame estimation errors of a single seeded trial."""

    mse: float
    errors: np.ndarray
    converged: bool


@dataclass(frozen=True)
class CellResult:
    """Trial statistics for one (truth, snr, k, method) cell."""

    truth: str
    snr_db: float
    k: int
    method: str
    optimizer: str
    init: str
    mse_mean: float
    ci_lo: float
    ci_hi: float
    bias_sq: float
    variance: float
    converged_frac: float
    wall_s: float


@dataclass(frozen=True)
class SweepResult:
    """All cell rows plus per-truth load failures."""

    rows: tuple
    errors: tuple


def trial_stack(truth, snr_db, k, trajectory: TrajectoryModel, seed: int):
    """The synthetic stack a trial sees; independent of the method under test."""
    shifts = draw_shifts(trajectory, k, stable_seed(seed, "shifts"))
    if np.isinf(snr_db) and snr_db > 0:
        sigma2 = 0.0
    else:
        sigma2 = sigma_for_snr_db(truth, snr_db)
    return make_stack(truth, shifts, sigma2, stable_seed(seed, "noise"))


def _fitted_prior(stack) -> PriorSpectrum:
    spectra = np.fft.fft2(stack.frames, norm="ortho", axes=(-2, -1))
    alpha = fit_prior_amplitude(spectra, stack.sigma2, warn=False)
    return PriorSpectrum.isotropic(
        stack.truth.shape, alpha, max(stack.sigma2, _MIN_PRIOR_NOISE)
    )


def run_trial(truth, snr_db, k, method, trajectory, seed) -> TrialResult:
    """Generate one stack, run one estimator, return wrapped shift errors."""
    stack = trial_stack(truth, snr_db, k, trajectory, seed)
    name, optimizer, init = method
    if name == "mle":
        cfg = EstimatorConfig(
            method="mle",
            optimizer=optimizer,
            init=init,
            seed=stable_seed(seed, "init"),
        )
        runner = estimate_mle_ccd if optimizer == "ccd" else estimate_mle_vp
        res = runner(stack.frames, cfg)
        estimated, converged = res.shifts, res.converged
    elif name == "map":
        cfg = EstimatorConfig(
            method="map",
            optimizer=optimizer,
            init=init,
            seed=stable_seed(seed, "init"),
        )
        res = estimate_map(stack.frames, cfg, _fitted_prior(stack))
        estimated, converged = res.shifts, res.converged
    elif name == "constrained":
        weights = wiener_filter(_fitted_prior(stack), stack.frames.shape[0])
        estimated = estimate_constrained(stack.frames, weights)
        converged = True
    else:
        raise ValueError(f"unknown method {name!r}")
    errors = wrap_shift(estimated[1:] - stack.true_shifts[1:], truth.shape)
    mse = float(np.sum(errors**2) / k)
    return TrialResult(mse=mse, errors=errors, converged=converged)


def _run_cell(job) -> CellResult:
    truth, truth_name, snr_db, k, method, trajectory, trials, base_seed = job
    start = time.perf_counter()
    errors = np.empty((trials, k, 2))
    mses = np.empty(trials)
    converged = 0
    for t in range(trials):
        seed = stable_seed(base_seed, truth_name, float(snr_db), int(k), int(t))
        res = run_trial(truth, snr_db, k, method, trajectory, seed)
        errors[t] = res.errors
        mses[t] = res.mse
        converged += bool(res.converged)
    wall = time.perf_counter() - start

    mse_mean = float(mses.mean())
    sem = float(mses.std(ddof=1)) / float(np.sqrt(trials))
    half = float(stats.t.ppf(0.975, trials - 1)) * sem
    # grand mean over trials and frames, so mse_mean == bias_sq + variance exactly
    pooled = errors.reshape(-1, 2)
    bias_sq = float(np.sum(pooled.mean(axis=0) ** 2))
    variance = float(np.sum(pooled.var(axis=0, ddof=0)))
    return CellResult(
        truth=truth_name,
        snr_db=float(snr_db),
        k=int(k),
        method=method[0],
        optimizer=method[1],
        init=method[2],
        mse_mean=mse_mean,
        ci_lo=mse_mean - half,
        ci_hi=mse_mean + half,
        bias_sq=bias_sq,
        variance=variance,
        converged_frac=converged / trials,
        wall_s=wall,
    )


def resolve_workers(requested) -> int:
    """Worker count after the SHIFTBENCH_THREADS environment cap."""
    count = 1 if requested is None else max(1, int(requested))
    cap = os.environ.get("SHIFTBENCH_THREADS")
    if cap is not None:
        count = min(count, max(1, int(cap)))
    return count


def run_sweep(spec: SweepSpec, truths=None, workers=1, on_cell=None) -> SweepResult:
    """Run every cell of the sweep; deterministic given a SweepSpec.

    Truths resolve from the `truths` mapping when given (arrays used
    as-is), otherwise each truth_images entry is loaded from disk and
    band-limit-prepared. Load failures are recorded per truth and the
    sweep continues. `on_cell` is called with each CellResult as it
    finishes.
    """
    resolved = []
    errors = []
    for name in spec.truth_images:
        try:
            if truths is not None:
                if name not in truths:
                    raise KeyError(f"truth {name!r} not in provided mapping")
                grid = np.asarray(truths[name], dtype=np.float64)
            else:
                grid = prepare_truth(read_image(name))
        except Exception as exc:
            errors.append((name, str(exc)))
            continue
        resolved.append((name, grid))

    jobs = [
        (grid, name, snr_db, k, method, spec.trajectory, spec.trials, spec.base_seed)
        for name, grid in resolved
        for snr_db in spec.snr_grid_db
        for k in spec.k_values
        for method in spec.methods
    ]
    workers = resolve_workers(workers)
    rows = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finished = pool.map(_run_cell, jobs)
            for row in finished:
                if on_cell is not None:
                    on_cell(row)
                rows.append(row)
    else:
        for job in jobs:
            row = _run_cell(job)
            if on_cell is not None:
                on_cell(row)
            rows.append(row)
    rows.sort(key=lambda r: (r.truth, r.snr_db, r.k, r.method, r.optimizer, r.init))
    return SweepResult(rows=tuple(rows), errors=tuple(errors))


def emit_csv(result: SweepResult, path) -> None:
    """One row per cell, floats in repr form so parsing is lossless."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in result.rows:
            writer.writerow(
                [
                    r.truth,
                    repr(r.snr_db),
                    str(r.k),
                    r.method,
                    r.optimizer,
                    r.init,
                    repr(r.mse_mean),
                    repr(r.ci_lo),
                    repr(r.ci_hi),
                    repr(r.bias_sq),
                    repr(r.variance),
                    repr(r.converged_frac),
                    repr(r.wall_s),
                ]
            )


def load_csv(path) -> SweepResult:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER.split(","):
            raise ValueError("unrecognized csv header")
        for rec in reader:
            rows.append(
                CellResult(
                    truth=rec[0],
                    snr_db=float(rec[1]),
                    k=int(rec[2]),
                    method=rec[3],
                    optimizer=rec[4],
                    init=rec[5],
                    mse_mean=float(rec[6]),
                    ci_lo=float(rec[7]),
                    ci_hi=float(rec[8]),
                    bias_sq=float(rec[9]),
                    variance=float(rec[10]),
                    converged_frac=float(rec[11]),
                    wall_s=float(rec[12]),
                )
            )
    return SweepResult(rows=tuple(rows), errors=())


def knee_snr_db(snrs, mses):
    """Highest SNR whose mean MSE exceeds 1 px^2; None when none does."""
    failed = [float(s) for s, m in zip(snrs, mses) if m > 1.0]
    return max(failed) if failed else None


def emit_plot_script(result: SweepResult, path) -> None:
    """Gnuplot script with inline data: MSE vs SNR, log y, one curve per cell group."""
    curves = {}
    for r in result.rows:
        label = " ".join(p for p in (r.method, r.optimizer, r.init) if p)
        key = (r.truth, r.k, label)
        curves.setdefault(key, []).append((r.snr_db, r.mse_mean, r.ci_lo, r.ci_hi))

    lines = [
        "# MSE vs SNR per (truth, k, method); generated alongside the csv",
        "set datafile separator whitespace",
        "set xlabel 'SNR (dB)'",
        "set ylabel 'MSE (px^2)'",
        "set logscale y",
        "set key outside",
        "",
    ]
    plot_terms = []
    for idx, (key, points) in enumerate(sorted(curves.items())):
        truth, k, label = key
        block = f"$curve{idx}"
        lines.append(f"{block} << EOD")
        for snr, mse, lo, hi in sorted(points):
            lines.append(f"{snr!r} {mse!r} {lo!r} {hi!r}")
        lines.append("EOD")
        title = f"{truth} k={k} {label}"
        plot_terms.append(f"{block} using 1:2 with linespoints title '{title}'")
    lines.append("")
    if plot_terms:
        lines.append("plot " + ", \\\n     ".join(plot_terms))
    else:
        lines.append("# no data")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
