"""Synthetic data generation for shift estimation experiments.

Stacks follow the acquisition model: frame i is the truth circularly
shifted by tau_i (exact band-limited shift) plus white Gaussian noise of
variance sigma^2, with tau_0 = 0. Ground truths are band-limit-prepared
so the periodic Shannon-shift model holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shiftbench.spectral import (
    apply_shift,
    forward_transform,
    inverse_transform,
    omega_grid,
    validate_grid,
)

__all__ = [
    "SyntheticStack",
    "TrajectoryModel",
    "dead_leaves",
    "draw_shifts",
    "gradient_energy",
    "make_stack",
    "measure_snr_db",
    "prepare_truth",
    "sigma_for_snr_db",
]

_KINDS = ("iid-uniform", "drift")

# gradient energy below this fraction of total energy counts as constant
_DEGENERATE_RATIO = 1e-20


@dataclass(frozen=True)
class TrajectoryModel:
    """Shift trajectory family for stack generation.

    ``iid-uniform`` draws every component i.i.d. uniform on
    [-half_range, half_range]. ``drift`` accumulates per-frame steps of
    random speed (truncated normal) and slowly wandering direction.
    ``initial_angle`` fixes the drift's starting direction; None draws
    it uniformly on [0, 2*pi).
    """

    kind: str = "iid-uniform"
    half_range: float = 2.0
    speed_mean: float = 1.0
    speed_std: float = 0.0
    angle_std: float = 0.0
    initial_angle: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"trajectory kind must be one of {_KINDS}")
        if not (np.isfinite(self.half_range) and self.half_range > 0):
            raise ValueError("half_range must be finite and > 0")
        for name in ("speed_mean", "speed_std", "angle_std"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class SyntheticStack:
    """Generated frames plus everything needed to score an estimator."""

    truth: np.ndarray
    frames: np.ndarray
    true_shifts: np.ndarray
    sigma2: float
    snr_db: float


def draw_shifts(model: TrajectoryModel, k: int, seed: int) -> np.ndarray:
    """Draw K+1 shifts (row 0 pinned to zero) from the trajectory model."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    shifts = np.zeros((k + 1, 2))
    if model.kind == "iid-uniform":
        shifts[1:] = rng.uniform(-model.half_range, model.half_range, size=(k, 2))
        return shifts
    theta = (
        rng.uniform(0.0, 2.0 * np.pi)
        if model.initial_angle is None
        else float(model.initial_angle)
    )
    for i in range(1, k + 1):
        theta += rng.normal(0.0, model.angle_std) if model.angle_std > 0 else 0.0
        if model.speed_std > 0:
            speed = rng.normal(model.speed_mean, model.speed_std)
            while speed < 0:
                speed = rng.normal(model.speed_mean, model.speed_std)
        else:
            speed = model.speed_mean
        shifts[i] = shifts[i - 1] + speed * np.array([np.cos(theta), np.sin(theta)])
    return shifts


def make_stack(truth, shifts, sigma2: float, seed: int) -> SyntheticStack:
    """Warp the truth by each shift and add white Gaussian noise per frame."""
    g = validate_grid(truth)
    t = np.asarray(shifts, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 1 or not np.all(np.isfinite(t)):
        raise ValueError("shifts must be a finite (K+1, 2) array")
    if t[0, 0] != 0.0 or t[0, 1] != 0.0:
        raise ValueError("shift set must have entry 0 pinned to (0, 0)")
    if not (np.isfinite(sigma2) and sigma2 >= 0):
        raise ValueError("sigma2 must be finite and >= 0")

    spec = forward_transform(g)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(sigma2), size=(t.shape[0],) + g.shape)
    frames = np.empty_like(noise)
    for i, shift in enumerate(t):
        frames[i] = inverse_transform(apply_shift(spec, shift)) + noise[i]
    snr = measure_snr_db(g, sigma2) if sigma2 > 0 else np.inf
    return SyntheticStack(
        truth=g, frames=frames, true_shifts=t, sigma2=float(sigma2), snr_db=snr
    )


def gradient_energy(truth) -> float:
    """Total squared gradient of the periodic image, summed spectrally."""
    g = validate_grid(truth)
    spec = np.fft.fft2(g, norm="ortho")
    wy, wx = omega_grid(g.shape)
    return float(np.sum((wx**2 + wy**2) * (spec.real**2 + spec.imag**2)))


def measure_snr_db(truth, sigma2: float) -> float:
    """10 log10 of gradient energy over total noise energy N*sigma^2.

    Constant images have no gradient energy and return -inf.
    """
    g = validate_grid(truth)
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise ValueError("sigma2 must be finite and > 0")
    ge = gradient_energy(g)
    if ge <= _DEGENERATE_RATIO * max(float(np.sum(g**2)), 1e-300):
        return -np.inf
    return 10.0 * math.log10(ge / (g.size * sigma2))


def sigma_for_snr_db(truth, target_db: float) -> float:
    """Noise variance that makes measure_snr_db hit the target exactly."""
    g = validate_grid(truth)
    if not np.isfinite(target_db):
        raise ValueError("target_db must be finite")
    ge = gradient_energy(g)
    if ge <= _DEGENERATE_RATIO * max(float(np.sum(g**2)), 1e-300):
        raise ValueError("constant truth image has no SNR solution")
    return ge / (g.size * 10.0 ** (target_db / 10.0))


def _periodic_component(g: np.ndarray) -> np.ndarray:
    """Boundary-jump-free part of an image (periodic-plus-smooth split).

    The smooth remainder solves a discrete Laplace equation driven by the
    wraparound discontinuities; subtracting it leaves an image whose
    periodic extension has no border seams.
    """
    h, w = g.shape
    b = np.zeros_like(g)
    row_jump = g[-1, :] - g[0, :]
    col_jump = g[:, -1] - g[:, 0]
    b[0, :] += row_jump
    b[-1, :] -= row_jump
    b[:, 0] += col_jump
    b[:, -1] -= col_jump
    q = np.fft.fft2(b)
    denom = (
        2.0 * np.cos(2.0 * np.pi * np.arange(h) / h)[:, None]
        + 2.0 * np.cos(2.0 * np.pi * np.arange(w) / w)[None, :]
        - 4.0
    )
    denom[0, 0] = 1.0
    q /= denom
    q[0, 0] = 0.0
    return g - np.fft.ifft2(q).real


def prepare_truth(img) -> np.ndarray:
    """Make a photograph safe for the periodic band-limited shift model.

    Removes the border-seam (smooth) component, zeroes the top 10% of
    radial frequencies, and removes the mean.
    """
    g = validate_grid(img)
    p = _periodic_component(g)
    spec = np.fft.fft2(p, norm="ortho")
    wy, wx = omega_grid(g.shape)
    spec[np.sqrt(wx**2 + wy**2) > 0.9 * np.pi] = 0.0
    spec[0, 0] = 0.0
    return np.fft.ifft2(spec, norm="ortho").real


def dead_leaves(shape, seed: int, n_disks: int = 250) -> np.ndarray:
    """Occlusion scene of random disks with power-law radii, values in [0, 1].

    Serves as a self-contained stand-in for natural photographs: sharp
    occlusion edges and an approximately 1/|omega|^2 power spectrum.
    """
    h, w = int(shape[0]), int(shape[1])
    rng = np.random.default_rng(seed)
    img = np.full((h, w), 0.5)
    yy, xx = np.mgrid[0:h, 0:w]
    r_min, r_max = 2.0, max(min(h, w) / 3.0, 3.0)
    for _ in range(int(n_disks)):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        # inverse-CDF sample of p(r) ~ r^-3 on [r_min, r_max]
        u = rng.uniform()
        r = r_min / math.sqrt(1.0 - u * (1.0 - (r_min / r_max) ** 2))
        value = rng.uniform()
        # periodic distance so the scene tiles cleanly
        dy = np.minimum(np.abs(yy - cy), h - np.abs(yy - cy))
        dx = np.minimum(np.abs(xx - cx), w - np.abs(xx - cx))
        img[dy**2 + dx**2 <= r**2] = value
    return img
