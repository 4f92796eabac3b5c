"""Isotropic power-law image prior and the per-frequency Wiener weights.

The prior power spectral density is S_u(omega) = amplitude / |omega|^2,
the classic natural-image decay. The induced per-frequency weight for a
stack of n frames is W(omega) = S_u / (n * S_u + sigma^2), which tends to
1/n at DC (S_u -> infinity) and to S_u/sigma^2 where noise dominates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from shiftbench.spectral import omega_grid

__all__ = ["PriorSpectrum", "fit_prior_amplitude", "wiener_filter"]


@dataclass(frozen=True)
class PriorSpectrum:
    """Per-frequency prior power plus the observation noise variance.

    ``power`` holds S_u(omega) with the divergent DC entry stored as 0;
    the DC value is never used, the Wiener filter pins DC to its limit.
    """

    power: np.ndarray
    amplitude: float
    noise_variance: float

    def __post_init__(self):
        if not (np.isfinite(self.amplitude) and self.amplitude > 0):
            raise ValueError("prior amplitude must be finite and > 0")
        if not (np.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise ValueError("noise variance must be finite and > 0")
        p = np.asarray(self.power, dtype=np.float64)
        if p.ndim != 2 or not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("prior power must be a finite nonnegative 2D array")
        object.__setattr__(self, "power", p)

    @property
    def shape(self) -> tuple[int, int]:
        return self.power.shape

    @classmethod
    def isotropic(cls, shape, amplitude: float, noise_variance: float) -> "PriorSpectrum":
        """Build S_u(omega) = amplitude / |omega|^2 on the given grid shape."""
        if not (np.isfinite(amplitude) and amplitude > 0):
            raise ValueError("prior amplitude must be finite and > 0")
        wy, wx = omega_grid((int(shape[0]), int(shape[1])))
        w2 = wx**2 + wy**2
        power = np.zeros(w2.shape)
        nz = w2 > 0
        power[nz] = amplitude / w2[nz]
        return cls(power=power, amplitude=float(amplitude), noise_variance=float(noise_variance))


def wiener_filter(prior: PriorSpectrum, n_frames: int) -> np.ndarray:
    """Per-frequency weights S_u/(n S_u + sigma^2); DC pinned to 1/n."""
    n = int(n_frames)
    if n < 1:
        raise ValueError("frame count must be >= 1")
    s = prior.power
    w = s / (n * s + prior.noise_variance)
    w[0, 0] = 1.0 / n
    return w


def fit_prior_amplitude(spectra, sigma2: float, warn: bool = True) -> float:
    """Least-squares amplitude of the 1/|omega|^2 law from observed power.

    Fits mean |z(omega)|^2 - sigma2 against amplitude/|omega|^2 over all
    non-DC frequencies. The result is clamped from below at
    1e-8 x mean observed power (with an absolute floor for all-zero
    input) so downstream Wiener weights stay strictly positive.
    """
    z = np.asarray(spectra, dtype=np.complex128)
    if z.ndim == 2:
        z = z[None]
    if z.ndim != 3:
        raise ValueError("spectra must be one 2D array or a stack of them")
    if not (np.isfinite(sigma2) and sigma2 >= 0):
        raise ValueError("sigma2 must be finite and >= 0")

    power = np.mean(z.real**2 + z.imag**2, axis=0)
    wy, wx = omega_grid(power.shape)
    w2 = wx**2 + wy**2
    nz = w2 > 0
    g = 1.0 / w2[nz]
    alpha = float(g @ (power[nz] - sigma2) / (g @ g))

    alpha_min = max(1e-8 * float(power.mean()), 1e-12)
    if not np.isfinite(alpha) or alpha < alpha_min:
        if warn:
            warnings.warn(
                "prior amplitude fit clamped to its floor (data carries no "
                "resolvable power-law signal)",
                RuntimeWarning,
                stacklevel=2,
            )
        return alpha_min
    return alpha
