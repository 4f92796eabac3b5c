"""Command-line front end: synth | estimate | bench | align-burst.

Every flag can also come from a plain key=value config file passed with
--config; explicit flags win over file values, file values win over
built-in defaults. Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image

from shiftbench.bench import (
    SweepSpec,
    emit_csv,
    emit_plot_script,
    resolve_workers,
    run_sweep,
    stable_seed,
)
from shiftbench.estimators import (
    EstimatorConfig,
    common_cost,
    estimate_constrained,
    estimate_map,
    estimate_mle_ccd,
    estimate_mle_vp,
    estimate_noise_variance,
    reconstruct_latent,
)
from shiftbench.fileio import (
    dequantize,
    manifest_precision,
    quantize,
    read_image,
    read_manifest,
    read_meta,
    read_pgm,
    write_manifest,
    write_meta,
    write_pgm,
    write_png,
)
from shiftbench.prior import PriorSpectrum, fit_prior_amplitude, wiener_filter
from shiftbench.spectral import wrap_shift
from shiftbench.synth import (
    TrajectoryModel,
    draw_shifts,
    make_stack,
    prepare_truth,
    sigma_for_snr_db,
)

_MIN_PRIOR_NOISE = 1e-30
_FRAME_SUFFIXES = (".pgm", ".png", ".npy")


class UsageError(Exception):
    """Bad flags, config keys, or spec content; exits 2."""


class DataError(Exception):
    """Unreadable or inconsistent input data; exits 1."""


def _parse_kv(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def _merged_options(ns: argparse.Namespace) -> dict:
    defaults = ns._defaults
    merged = dict(defaults)
    if ns.config is not None:
        raw = _parse_kv(Path(ns.config))
        unknown = sorted(set(raw) - set(defaults))
        if unknown:
            raise UsageError("unknown config keys: " + ", ".join(unknown))
        for key, value in raw.items():
            try:
                merged[key] = ns._types[key](value)
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {value!r}") from exc
    for key, value in vars(ns).items():
        if key in defaults:
            merged[key] = value
    return merged


def _require(merged: dict, command: str, *keys) -> None:
    missing = [k for k in keys if merged[k] is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"{command} requires {flags}")


def _trajectory_from(merged: dict) -> TrajectoryModel:
    token = merged["trajectory"]
    kinds = {"iid": "iid-uniform", "drift": "drift"}
    if token not in kinds:
        raise UsageError(f"trajectory must be iid or drift, got {token!r}")
    try:
        return TrajectoryModel(
            kind=kinds[token],
            half_range=merged["half_range"],
            speed_mean=merged["speed_mean"],
            speed_std=merged["speed_std"],
            angle_std=merged["angle_std"],
            initial_angle=merged["initial_angle"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fitted_prior(frames: np.ndarray, sigma2: float) -> PriorSpectrum:
    spectra = np.fft.fft2(frames, norm="ortho", axes=(-2, -1))
    alpha = fit_prior_amplitude(spectra, sigma2, warn=False)
    return PriorSpectrum.isotropic(
        frames.shape[1:], alpha, max(sigma2, _MIN_PRIOR_NOISE)
    )


def _print_shifts(shifts: np.ndarray) -> None:
    for i, (tx, ty) in enumerate(shifts):
        print(f"{i} {tx:.9g} {ty:.9g}")


def cmd_synth(merged: dict) -> int:
    _require(merged, "synth", "truth", "out")
    k = merged["k"]
    if k < 1:
        raise UsageError("--k must be >= 1")
    fmt = merged["format"]
    if fmt not in ("pgm", "pgm8", "npy"):
        raise UsageError(f"format must be pgm, pgm8, or npy, got {fmt!r}")
    snr_db = merged["snr_db"]
    if math.isnan(snr_db):
        raise UsageError("--snr-db must not be NaN")
    trajectory = _trajectory_from(merged)
    seed = merged["seed"]

    try:
        truth = prepare_truth(read_image(merged["truth"]))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load truth image: {exc}") from exc

    shifts = manifest_precision(draw_shifts(trajectory, k, stable_seed(seed, "shifts")))
    if math.isinf(snr_db) and snr_db > 0:
        sigma2 = 0.0
    else:
        try:
            sigma2 = sigma_for_snr_db(truth, snr_db)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    stack = make_stack(truth, shifts, sigma2, stable_seed(seed, "noise"))

    out_dir = Path(merged["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "k": k,
        "seed": seed,
        "sigma2": sigma2,
        "snr_db": stack.snr_db,
        "format": fmt,
        "scale": 1.0,
        "offset": 0.0,
    }
    if fmt == "npy":
        for i in range(k + 1):
            np.save(out_dir / f"frame_{i:03d}.npy", stack.frames[i])
    else:
        bits = 16 if fmt == "pgm" else 8
        ints, scale, offset = quantize(stack.frames, bits=bits)
        meta["scale"] = scale
        meta["offset"] = offset
        for i in range(k + 1):
            write_pgm(out_dir / f"frame_{i:03d}.pgm", ints[i], (1 << bits) - 1)
    write_manifest(out_dir / "manifest.txt", shifts)
    write_meta(out_dir / "meta.json", meta)
    print(f"wrote {k + 1} frames to {out_dir}")
    return 0


def _load_frame_stack(dir_path: Path):
    """Gray frame stack plus metadata; dequantizes stacks synth wrote."""
    paths = sorted(
        p for p in dir_path.glob("frame_*") if p.suffix.lower() in _FRAME_SUFFIXES
    )
    if not paths:
        raise DataError(f"no frame_* images in {dir_path}")
    arrays = []
    for p in paths:
        try:
            arr = read_image(p)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read {p}: {exc}") from exc
        if arr.ndim != 2:
            raise DataError(f"{p} is not a single-channel image")
        arrays.append(arr)
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise DataError(f"frame sizes differ: {sorted(shapes)}")
    frames = np.stack(arrays)
    meta = {}
    meta_path = dir_path / "meta.json"
    if meta_path.exists():
        meta = read_meta(meta_path)
        if meta.get("format") != "npy" and "scale" in meta and "offset" in meta:
            frames = dequantize(frames, meta["scale"], meta["offset"])
    return frames, meta


def cmd_estimate(merged: dict) -> int:
    _require(merged, "estimate", "frames")
    method = merged["method"]
    if method not in ("mle", "map", "constrained"):
        raise UsageError(f"method must be mle, map, or constrained, got {method!r}")
    optimizer = merged["optimizer"]
    if optimizer not in ("ccd", "vp"):
        raise UsageError(f"optimizer must be ccd or vp, got {optimizer!r}")
    init = merged["init"]
    if init not in ("pairwise", "random"):
        raise UsageError(f"init must be pairwise or random, got {init!r}")
    if merged["sigma2"] is not None and merged["sigma2"] < 0:
        raise UsageError("--sigma2 must be >= 0")

    frames, meta = _load_frame_stack(Path(merged["frames"]))
    if frames.shape[0] < 2:
        raise DataError("need at least two frames")
    sigma2 = merged["sigma2"]
    if sigma2 is None:
        sigma2 = meta.get("sigma2")
    if sigma2 is None:
        sigma2 = estimate_noise_variance(frames[0])
    sigma2 = float(sigma2)

    if method == "constrained":
        weights = wiener_filter(_fitted_prior(frames, sigma2), frames.shape[0])
        shifts = estimate_constrained(frames, weights)
        cost = common_cost(frames, shifts, weights)
        iterations, converged = 1, True
    else:
        cfg = EstimatorConfig(
            method=method, optimizer=optimizer, init=init, seed=merged["seed"]
        )
        if method == "mle":
            runner = estimate_mle_ccd if optimizer == "ccd" else estimate_mle_vp
            res = runner(frames, cfg)
        else:
            res = estimate_map(frames, cfg, _fitted_prior(frames, sigma2))
        shifts, cost = res.shifts, res.final_cost
        iterations, converged = res.iterations, res.converged

    _print_shifts(shifts)
    print(f"cost {cost!r}")
    print(f"iterations {iterations}")
    print(f"converged {'true' if converged else 'false'}")

    if merged["truth_manifest"] is not None:
        truth_shifts = read_manifest(merged["truth_manifest"])
        if truth_shifts.shape != shifts.shape:
            raise DataError("manifest frame count does not match the stack")
        err = wrap_shift(shifts[1:] - truth_shifts[1:], frames.shape[1:])
        mse = float(np.sum(err**2) / max(frames.shape[0] - 1, 1))
        print(f"mse {mse!r}")
    return 0


def _parse_methods(text: str) -> tuple:
    methods = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        if token == "constrained":
            methods.append(("constrained", "", ""))
            continue
        parts = token.split(":")
        if len(parts) != 3:
            raise UsageError(
                f"method {token!r} must be name:optimizer:init or constrained"
            )
        methods.append(tuple(parts))
    if not methods:
        raise UsageError("methods list is empty")
    return tuple(methods)


_SPEC_KEYS = (
    "truth_images",
    "snr_grid_db",
    "k_values",
    "methods",
    "trajectory",
    "half_range",
    "speed_mean",
    "speed_std",
    "angle_std",
    "initial_angle",
    "trials",
    "base_seed",
)


def _parse_sweep_spec(path: Path) -> SweepSpec:
    fields = _parse_kv(path)
    unknown = sorted(set(fields) - set(_SPEC_KEYS))
    if unknown:
        raise UsageError("unknown spec keys: " + ", ".join(unknown))
    missing = [
        k
        for k in ("truth_images", "snr_grid_db", "k_values", "methods")
        if k not in fields
    ]
    if missing:
        raise UsageError("spec is missing keys: " + ", ".join(missing))

    def items(key):
        return [t.strip() for t in fields[key].split(",") if t.strip()]

    trajectory = _trajectory_from(
        {
            "trajectory": fields.get("trajectory", "iid"),
            "half_range": float(fields.get("half_range", 2.0)),
            "speed_mean": float(fields.get("speed_mean", 1.0)),
            "speed_std": float(fields.get("speed_std", 0.0)),
            "angle_std": float(fields.get("angle_std", 0.0)),
            "initial_angle": (
                float(fields["initial_angle"]) if "initial_angle" in fields else None
            ),
        }
    )
    try:
        return SweepSpec(
            truth_images=tuple(items("truth_images")),
            snr_grid_db=tuple(float(s) for s in items("snr_grid_db")),
            k_values=tuple(int(s) for s in items("k_values")),
            methods=_parse_methods(fields["methods"]),
            trajectory=trajectory,
            trials=int(fields.get("trials", 100)),
            base_seed=int(fields.get("base_seed", 0)),
        )
    except ValueError as exc:
        raise UsageError(f"bad spec: {exc}") from exc


def cmd_bench(merged: dict) -> int:
    _require(merged, "bench", "spec", "out")
    spec = _parse_sweep_spec(Path(merged["spec"]))
    if merged["seed"] is not None:
        spec = replace(spec, base_seed=merged["seed"])
    workers = resolve_workers(merged["workers"])

    def on_cell(row):
        label = row.method
        if row.optimizer:
            label = f"{row.method}:{row.optimizer}:{row.init}"
        print(
            f"cell {row.truth} snr={row.snr_db:g} k={row.k} method={label} "
            f"mse={row.mse_mean:.4g} wall={row.wall_s:.3g}s",
            file=sys.stderr,
        )

    result = run_sweep(spec, workers=workers, on_cell=on_cell)
    emit_csv(result, merged["out"])
    if merged["plot"] is not None:
        emit_plot_script(result, merged["plot"])
    if result.errors:
        for name, message in result.errors:
            print(f"error: truth {name}: {message}", file=sys.stderr)
        return 1
    return 0


def _load_burst(dir_path: Path):
    """Frame stack (gray or color), retaining the source integer range."""
    paths = sorted(
        p for p in dir_path.glob("frame_*") if p.suffix.lower() in _FRAME_SUFFIXES
    )
    if not paths:
        raise DataError(f"no frame_* images in {dir_path}")
    arrays, maxval = [], None
    for p in paths:
        suffix = p.suffix.lower()
        try:
            if suffix == ".pgm":
                samples, mv = read_pgm(p)
                arrays.append(samples.astype(np.float64))
            elif suffix == ".png":
                with Image.open(p) as img:
                    raw = np.asarray(img)
                mv = 65535 if raw.dtype.itemsize > 1 else 255
                arrays.append(raw.astype(np.float64))
            else:
                arrays.append(np.asarray(np.load(p), dtype=np.float64))
                mv = None
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read {p}: {exc}") from exc
        if maxval is None:
            maxval = mv
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise DataError(f"frame sizes differ: {sorted(shapes)}")
    return np.stack(arrays), maxval


def _write_average(path: Path, average: np.ndarray, maxval) -> None:
    suffix = path.suffix.lower()
    if suffix not in (".pgm", ".png"):
        raise UsageError("output must end in .pgm or .png")
    if average.ndim == 3:
        if suffix == ".pgm":
            raise UsageError("pgm holds one channel; use .png for color output")
        if maxval is None or maxval > 255:
            raise DataError("color output requires 8-bit source frames")
        write_png(path, np.clip(np.rint(average), 0, 255).astype(np.uint8))
        return
    if maxval is None:
        ints, _, _ = quantize(average, bits=16)
        samples, maxval = ints, 65535
    else:
        clipped = np.clip(np.rint(average), 0, maxval)
        samples = clipped.astype(np.uint16 if maxval > 255 else np.uint8)
    if suffix == ".pgm":
        write_pgm(path, samples, maxval)
    else:
        write_png(path, samples)


def cmd_align_burst(merged: dict) -> int:
    _require(merged, "align-burst", "frames", "out")
    method = merged["method"]
    if method not in ("mle", "map", "constrained"):
        raise UsageError(f"method must be mle, map, or constrained, got {method!r}")
    patch_size = merged["patch_size"]
    if patch_size < 4:
        raise UsageError("--patch-size must be >= 4")
    channel = merged["channel"]
    if channel < 0:
        raise UsageError("--channel must be >= 0")
    if merged["sigma2"] is not None and merged["sigma2"] < 0:
        raise UsageError("--sigma2 must be >= 0")

    images, maxval = _load_burst(Path(merged["frames"]))
    if images.shape[0] < 2:
        raise DataError("need at least two frames")
    if images.ndim == 4:
        if channel >= images.shape[3]:
            raise DataError(
                f"channel {channel} out of range for {images.shape[3]}-channel frames"
            )
        est_frames = images[..., channel]
    elif images.ndim == 3:
        if channel != 0:
            raise DataError("gray frames have only channel 0")
        est_frames = images
    else:
        raise DataError("frames must be 2D gray or 3-channel images")

    height, width = est_frames.shape[1:]
    x0 = merged["patch_x"] if merged["patch_x"] is not None else (width - patch_size) // 2
    y0 = merged["patch_y"] if merged["patch_y"] is not None else (height - patch_size) // 2
    if x0 < 0 or y0 < 0 or x0 + patch_size > width or y0 + patch_size > height:
        raise DataError(
            f"patch [{y0}:{y0 + patch_size}, {x0}:{x0 + patch_size}] exceeds "
            f"frame bounds {height}x{width}"
        )
    patch = est_frames[:, y0 : y0 + patch_size, x0 : x0 + patch_size]

    sigma2 = merged["sigma2"]
    if sigma2 is None:
        sigma2 = estimate_noise_variance(patch[0])
    sigma2 = float(sigma2)

    if method == "constrained":
        weights = wiener_filter(_fitted_prior(patch, sigma2), patch.shape[0])
        shifts = estimate_constrained(patch, weights)
    else:
        cfg = EstimatorConfig(method=method, seed=merged["seed"])
        if method == "mle":
            shifts = estimate_mle_ccd(patch, cfg).shifts
        else:
            shifts = estimate_map(patch, cfg, _fitted_prior(patch, sigma2)).shifts

    if images.ndim == 4:
        average = np.stack(
            [
                reconstruct_latent(images[..., c], shifts)
                for c in range(images.shape[3])
            ],
            axis=-1,
        )
    else:
        average = reconstruct_latent(images, shifts)

    _write_average(Path(merged["out"]), average, maxval)
    _print_shifts(shifts)
    print(f"sigma2 {sigma2!r}")
    return 0


_SYNTH_DEFAULTS = {
    "truth": None,
    "out": None,
    "k": 5,
    "snr_db": float("inf"),
    "trajectory": "iid",
    "half_range": 2.0,
    "speed_mean": 1.0,
    "speed_std": 0.0,
    "angle_std": 0.0,
    "initial_angle": None,
    "seed": 0,
    "format": "pgm",
}
_ESTIMATE_DEFAULTS = {
    "frames": None,
    "method": "mle",
    "optimizer": "ccd",
    "init": "pairwise",
    "sigma2": None,
    "truth_manifest": None,
    "seed": 0,
}
_BENCH_DEFAULTS = {
    "spec": None,
    "out": None,
    "plot": None,
    "workers": None,
    "seed": None,
}
_ALIGN_DEFAULTS = {
    "frames": None,
    "out": None,
    "method": "map",
    "channel": 0,
    "patch_x": None,
    "patch_y": None,
    "patch_size": 128,
    "sigma2": None,
    "seed": 0,
}
_TYPES = {
    "truth": str,
    "out": str,
    "k": int,
    "snr_db": float,
    "trajectory": str,
    "half_range": float,
    "speed_mean": float,
    "speed_std": float,
    "angle_std": float,
    "initial_angle": float,
    "seed": int,
    "format": str,
    "frames": str,
    "method": str,
    "optimizer": str,
    "init": str,
    "sigma2": float,
    "truth_manifest": str,
    "spec": str,
    "plot": str,
    "workers": int,
    "channel": int,
    "patch_x": int,
    "patch_y": int,
    "patch_size": int,
}


def _subparser(subparsers, name, func, defaults, flags):
    sub = subparsers.add_parser(name, help=f"{name} command")
    sub.add_argument("--config", default=None, help="key=value defaults file")
    for flag, kwargs in flags.items():
        sub.add_argument(flag, default=argparse.SUPPRESS, **kwargs)
    sub.set_defaults(func=func, _defaults=defaults, _types=_TYPES)
    return sub


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftbench",
        description="Synthesize, estimate, benchmark, and align shifted image stacks.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    _subparser(
        subparsers,
        "synth",
        cmd_synth,
        _SYNTH_DEFAULTS,
        {
            "--truth": {"help": "truth image (.pgm/.png/.npy)"},
            "--out": {"help": "output directory"},
            "--k": {"type": int, "help": "number of moving frames"},
            "--snr-db": {"type": float, "help": "target SNR; inf for noiseless"},
            "--trajectory": {"help": "iid or drift"},
            "--half-range": {"type": float},
            "--speed-mean": {"type": float},
            "--speed-std": {"type": float},
            "--angle-std": {"type": float},
            "--initial-angle": {"type": float},
            "--seed": {"type": int},
            "--format": {"help": "pgm, pgm8, or npy"},
        },
    )
    _subparser(
        subparsers,
        "estimate",
        cmd_estimate,
        _ESTIMATE_DEFAULTS,
        {
            "--frames": {"help": "directory of frame_* images"},
            "--method": {"help": "mle, map, or constrained"},
            "--optimizer": {"help": "ccd or vp"},
            "--init": {"help": "pairwise or random"},
            "--sigma2": {"type": float, "help": "noise variance override"},
            "--truth-manifest": {"help": "manifest to score against"},
            "--seed": {"type": int},
        },
    )
    _subparser(
        subparsers,
        "bench",
        cmd_bench,
        _BENCH_DEFAULTS,
        {
            "--spec": {"help": "sweep spec file (key=value)"},
            "--out": {"help": "csv output path"},
            "--plot": {"help": "optional gnuplot script path"},
            "--workers": {"type": int, "help": "parallel cell workers"},
            "--seed": {"type": int, "help": "override spec base_seed"},
        },
    )
    _subparser(
        subparsers,
        "align-burst",
        cmd_align_burst,
        _ALIGN_DEFAULTS,
        {
            "--frames": {"help": "directory of frame_* images"},
            "--out": {"help": "average image (.pgm or .png)"},
            "--method": {"help": "mle, map, or constrained"},
            "--channel": {"type": int, "help": "channel used for estimation"},
            "--patch-x": {"type": int, "help": "patch left column; default centered"},
            "--patch-y": {"type": int, "help": "patch top row; default centered"},
            "--patch-size": {"type": int},
            "--sigma2": {"type": float, "help": "noise variance override"},
            "--seed": {"type": int},
        },
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        merged = _merged_options(ns)
        return ns.func(merged)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
