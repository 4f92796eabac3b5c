"""Transform and shift-operator tests.

Expected values come from independent routes: a direct O(N^2) DFT written
out from the definition, hand-evaluated scalars, and algebraic identities.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftbench.spectral import (
    adjoint_unshift,
    apply_shift,
    forward_transform,
    inverse_transform,
    omega_grid,
    shift_grid,
    wrap_shift,
)


def dft2_direct(x):
    """Unitary 2D DFT computed straight from the definition, no FFT."""
    h, w = x.shape
    r = np.arange(h)
    c = np.arange(w)
    kh = np.exp(-2j * np.pi * np.outer(r, r) / h)
    kw = np.exp(-2j * np.pi * np.outer(c, c) / w)
    return kh @ x.astype(complex) @ kw.T / np.sqrt(h * w)


def random_spectrum(shape, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


# -- forward / inverse transform --------------------------------------------


def test_constant_grid_is_dc_only():
    g = np.full((4, 4), 1.7)
    s = forward_transform(g)
    assert s[0, 0] == pytest.approx(4 * 1.7, abs=1e-12)
    off_dc = s.copy()
    off_dc[0, 0] = 0.0
    assert np.max(np.abs(off_dc)) < 1e-12


def test_impulse_has_flat_quarter_magnitude():
    g = np.zeros((4, 4))
    g[0, 0] = 1.0
    s = forward_transform(g)
    assert np.allclose(np.abs(s), 0.25, atol=1e-13)


def test_matches_direct_dft_oracle():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(8, 8))
    s = forward_transform(g)
    assert np.allclose(s, dft2_direct(g), atol=1e-12)


def test_parseval_on_random_grid():
    rng = np.random.default_rng(1)
    g = rng.normal(size=(8, 8))
    s = forward_transform(g)
    e_space = np.sum(g**2)
    e_freq = np.sum(np.abs(s) ** 2)
    assert e_freq == pytest.approx(e_space, rel=1e-12)


def test_round_trip_256():
    rng = np.random.default_rng(2)
    g = rng.normal(size=(256, 256))
    back = inverse_transform(forward_transform(g))
    assert np.max(np.abs(back - g)) <= 1e-12 * np.max(np.abs(g))


def test_hermitian_symmetry_of_real_grid():
    rng = np.random.default_rng(3)
    g = rng.normal(size=(6, 8))
    s = forward_transform(g)
    h, w = s.shape
    mirrored = s[(-np.arange(h)) % h][:, (-np.arange(w)) % w]
    assert np.allclose(mirrored, np.conj(s), atol=1e-12)


def test_rejects_bad_grids():
    with pytest.raises(ValueError):
        forward_transform(np.array([[1.0, np.nan], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        forward_transform(np.ones(5))
    with pytest.raises(ValueError):
        forward_transform(np.ones((1, 5)))


# -- shift operator ----------------------------------------------------------


def test_zero_shift_is_identity():
    s = random_spectrum((8, 8), seed=4)
    assert np.array_equal(apply_shift(s, (0.0, 0.0)), s)


def test_integer_shift_moves_impulse():
    g = np.zeros((8, 8))
    g[0, 0] = 1.0
    s = forward_transform(g)
    moved = inverse_transform(apply_shift(s, (1.0, 0.0)))
    assert np.unravel_index(np.argmax(moved), moved.shape) == (0, 1)
    moved = inverse_transform(apply_shift(s, (3.0, 0.0)))
    assert np.unravel_index(np.argmax(moved), moved.shape) == (0, 3)
    moved = inverse_transform(apply_shift(s, (0.0, 2.0)))
    assert np.unravel_index(np.argmax(moved), moved.shape) == (2, 0)


def test_integer_shift_equals_roll():
    rng = np.random.default_rng(5)
    g = rng.normal(size=(8, 10))
    assert np.allclose(shift_grid(g, (3.0, 0.0)), np.roll(g, 3, axis=1), atol=1e-12)
    assert np.allclose(shift_grid(g, (0.0, 2.0)), np.roll(g, 2, axis=0), atol=1e-12)
    assert np.allclose(
        shift_grid(g, (-1.0, 4.0)), np.roll(np.roll(g, -1, axis=1), 4, axis=0), atol=1e-12
    )


def test_fractional_shift_group_inverse():
    s = random_spectrum((8, 8), seed=6)
    out = apply_shift(apply_shift(s, (0.37, -1.12)), (-0.37, 1.12))
    assert np.max(np.abs(out - s)) < 1e-12


def test_magnitudes_unchanged_at_every_frequency():
    s = random_spectrum((8, 8), seed=7)
    out = apply_shift(s, (0.7, -2.3))
    assert np.allclose(np.abs(out), np.abs(s), atol=1e-13)


@given(
    st.integers(0, 2**31 - 1),
    st.floats(-8, 8),
    st.floats(-8, 8),
    st.floats(-8, 8),
    st.floats(-8, 8),
)
def test_shift_group_law(seed, ax, ay, bx, by):
    s = random_spectrum((8, 6), seed=seed)
    lhs = apply_shift(apply_shift(s, (ax, ay)), (bx, by))
    rhs = apply_shift(s, (ax + bx, ay + by))
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(s)))


@given(st.integers(0, 2**31 - 1), st.floats(-10, 10), st.floats(-10, 10))
def test_parseval_preserved_under_shift(seed, tx, ty):
    s = random_spectrum((6, 6), seed=seed)
    out = apply_shift(s, (tx, ty))
    assert np.sum(np.abs(out) ** 2) == pytest.approx(np.sum(np.abs(s) ** 2), rel=1e-12)


@given(st.integers(0, 2**31 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_adjoint_inner_product_identity(seed, tx, ty):
    a = random_spectrum((8, 8), seed=seed)
    b = random_spectrum((8, 8), seed=seed + 987654321)
    lhs = np.vdot(b, apply_shift(a, (tx, ty)))
    rhs = np.vdot(adjoint_unshift(b, (tx, ty)), a)
    scale = max(1.0, abs(lhs))
    assert abs(lhs - rhs) < 1e-12 * scale


def test_adjoint_composition_is_identity():
    s = random_spectrum((8, 8), seed=8)
    out = apply_shift(adjoint_unshift(s, (1.41, -0.6)), (1.41, -0.6))
    assert np.max(np.abs(out - s)) < 1e-12
    assert np.array_equal(adjoint_unshift(s, (0.0, 0.0)), s)


def test_rejects_nonfinite_shift():
    s = random_spectrum((4, 4), seed=9)
    with pytest.raises(ValueError):
        apply_shift(s, (np.nan, 0.0))
    with pytest.raises(ValueError):
        apply_shift(s, (0.0, np.inf))


# -- canonical wraparound ----------------------------------------------------


def test_wrap_shift_examples():
    shape = (50, 50)
    assert np.allclose(wrap_shift((26.0, 0.0), shape), (-24.0, 0.0))
    assert np.allclose(wrap_shift((25.0, -25.0), shape), (25.0, 25.0))
    assert np.allclose(wrap_shift((-26.0, 51.0), shape), (24.0, 1.0))
    assert np.allclose(wrap_shift((3.25, -2.5), shape), (3.25, -2.5))


def test_wrap_shift_rectangular_axes():
    # tx wraps modulo the width (12), ty modulo the height (10)
    out = wrap_shift((7.0, 7.0), (10, 12))
    assert np.allclose(out, (-5.0, -3.0))


@given(st.floats(-300, 300), st.floats(-300, 300))
def test_wrap_shift_canonical_box(tx, ty):
    h, w = 14, 10
    out = wrap_shift((tx, ty), (h, w))
    assert -w / 2 < out[0] <= w / 2
    assert -h / 2 < out[1] <= h / 2
    # differs from the input by an integer number of periods
    kx = (tx - out[0]) / w
    ky = (ty - out[1]) / h
    assert abs(kx - round(kx)) < 1e-9
    assert abs(ky - round(ky)) < 1e-9


def test_wrap_shift_batched():
    shifts = np.array([[26.0, 0.0], [0.5, -27.0]])
    out = wrap_shift(shifts, (50, 50))
    assert np.allclose(out, [[-24.0, 0.0], [0.5, 23.0]])


def test_omega_grid_layout():
    wy, wx = omega_grid((4, 6))
    assert wx.shape == (4, 6) and wy.shape == (4, 6)
    assert wx[0, 1] == pytest.approx(2 * np.pi / 6)
    assert wy[1, 0] == pytest.approx(2 * np.pi / 4)
    assert wx[0, 3] == pytest.approx(-np.pi)  # Nyquist column of width 6
    assert wy[2, 0] == pytest.approx(-np.pi)  # Nyquist row of height 4
