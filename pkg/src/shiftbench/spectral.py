"""Fourier machinery for periodic subpixel translation.

Conventions shared by every module in this package:

* Pixel grids are 2D float64 arrays indexed [row, col], height H and
  width W, with periodic extension semantics.
* Spectra are complex128 arrays of the same shape produced by the
  unitary DFT (``norm="ortho"``), frequencies in standard FFT order, so
  Parseval holds with no extra factors.
* Angular frequencies are omega_x = 2*pi*fftfreq(W) along columns and
  omega_y = 2*pi*fftfreq(H) along rows, radians per pixel.
* A shift t = (tx, ty) moves content tx pixels along +x (columns) and
  ty pixels along +y (rows): shifted(x) = original(x - t). On spectra
  this is multiplication by exp(-i * omega . t), a unit-modulus phase
  at every frequency, hence exactly invertible and norm preserving.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "adjoint_unshift",
    "apply_shift",
    "forward_transform",
    "inverse_transform",
    "omega_grid",
    "shift_grid",
    "shift_phase",
    "validate_grid",
    "wrap_shift",
]


def validate_grid(samples) -> np.ndarray:
    """Coerce to a float64 pixel grid, rejecting non-2D or non-finite input."""
    g = np.asarray(samples, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 2 or g.shape[1] < 2:
        raise ValueError("pixel grid must be 2D with height >= 2 and width >= 2")
    if not np.all(np.isfinite(g)):
        raise ValueError("pixel grid contains non-finite samples")
    return g


@lru_cache(maxsize=32)
def _omega_1d(n: int) -> np.ndarray:
    w = 2.0 * np.pi * np.fft.fftfreq(n)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=32)
def omega_grid(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Angular frequency grids (omega_y, omega_x), each of shape (H, W).

    Cached read-only arrays; do not mutate.
    """
    h, w = int(shape[0]), int(shape[1])
    wy, wx = np.meshgrid(_omega_1d(h), _omega_1d(w), indexing="ij")
    wy.setflags(write=False)
    wx.setflags(write=False)
    return wy, wx


def forward_transform(grid) -> np.ndarray:
    """Unitary 2D DFT of a real pixel grid."""
    return np.fft.fft2(validate_grid(grid), norm="ortho")


def inverse_transform(coeffs) -> np.ndarray:
    """Real part of the unitary inverse DFT.

    Taking the real part symmetrizes any Hermitian-asymmetric residue
    (only the Nyquist rows/columns can carry one after fractional shifts
    of real images), so warped real images come back real.
    """
    s = np.asarray(coeffs, dtype=np.complex128)
    if s.ndim != 2:
        raise ValueError("spectrum must be 2D")
    if not np.all(np.isfinite(s)):
        raise ValueError("spectrum contains non-finite coefficients")
    return np.fft.ifft2(s, norm="ortho").real


def _check_shift(shift) -> tuple[float, float]:
    t = np.asarray(shift, dtype=np.float64).reshape(-1)
    if t.size != 2 or not np.all(np.isfinite(t)):
        raise ValueError("shift must be two finite components (tx, ty)")
    return float(t[0]), float(t[1])


def shift_phase(shape: tuple[int, int], shift) -> np.ndarray:
    """Diagonal phase factor exp(-i * omega . t) for the given grid shape."""
    tx, ty = _check_shift(shift)
    wy, wx = omega_grid((int(shape[0]), int(shape[1])))
    return np.exp(-1j * (wx * tx + wy * ty))


def apply_shift(coeffs, shift) -> np.ndarray:
    """Shift a spectrum by t = (tx, ty): coeff(omega) * exp(-i omega . t)."""
    s = np.asarray(coeffs, dtype=np.complex128)
    tx, ty = _check_shift(shift)
    if tx == 0.0 and ty == 0.0:
        return s.copy()
    return s * shift_phase(s.shape, (tx, ty))


def adjoint_unshift(coeffs, shift) -> np.ndarray:
    """Adjoint of apply_shift, equal to shifting by -t."""
    tx, ty = _check_shift(shift)
    return apply_shift(coeffs, (-tx, -ty))


def shift_grid(grid, shift) -> np.ndarray:
    """Circularly shift a real pixel grid by a (possibly fractional) vector."""
    return inverse_transform(apply_shift(forward_transform(grid), shift))


def wrap_shift(shift, shape) -> np.ndarray:
    """Canonical wraparound representative in (-W/2, W/2] x (-H/2, H/2].

    Accepts a single (tx, ty) pair or an array of them (last axis = 2).
    tx wraps modulo the width, ty modulo the height.
    """
    t = np.asarray(shift, dtype=np.float64)
    if t.shape[-1] != 2:
        raise ValueError("shifts must have (tx, ty) on the last axis")
    period = np.array([float(shape[1]), float(shape[0])])
    r = np.mod(t, period)
    r = np.where(r > period / 2.0, r - period, r)
    # in-box values pass through untouched so wrapping is idempotent bitwise
    in_box = (t > -period / 2.0) & (t <= period / 2.0)
    return np.where(in_box, t, r)
