"""Multi-frame translational alignment: estimators, synthesis, benchmarks.

Array conventions (see shiftbench.spectral for details): images are
(H, W) float arrays indexed [row, col]; shifts are (tx, ty) with tx along
columns and ty along rows; shift sets are (K+1, 2) arrays whose row 0 is
pinned to (0, 0).
"""

from shiftbench.spectral import (
    adjoint_unshift,
    apply_shift,
    forward_transform,
    inverse_transform,
    shift_grid,
    wrap_shift,
)

__all__ = [
    "adjoint_unshift",
    "apply_shift",
    "forward_transform",
    "inverse_transform",
    "shift_grid",
    "wrap_shift",
]

__version__ = "0.1.0"
