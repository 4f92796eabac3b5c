"""Synthetic stack generation, trajectories, SNR measures, truth preparation."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftbench.spectral import adjoint_unshift, forward_transform, omega_grid
from shiftbench.synth import (
    TrajectoryModel,
    _periodic_component,
    dead_leaves,
    draw_shifts,
    gradient_energy,
    make_stack,
    measure_snr_db,
    prepare_truth,
    sigma_for_snr_db,
)


# -- trajectories ------------------------------------------------------------


def test_draw_shifts_gauge_and_shape():
    for kind in ("iid-uniform", "drift"):
        model = TrajectoryModel(kind=kind)
        shifts = draw_shifts(model, k=1, seed=0)
        assert shifts.shape == (2, 2)
        assert np.array_equal(shifts[0], (0.0, 0.0))


def test_iid_uniform_component_variance():
    model = TrajectoryModel(kind="iid-uniform", half_range=2.0)
    shifts = draw_shifts(model, k=100_000, seed=1)
    var = shifts[1:].var()
    assert var == pytest.approx(4.0 / 3.0, rel=0.05)
    assert np.max(np.abs(shifts)) <= 2.0


def test_degenerate_drift_is_straight_line():
    model = TrajectoryModel(
        kind="drift", speed_mean=1.0, speed_std=0.0, angle_std=0.0, initial_angle=0.0
    )
    shifts = draw_shifts(model, k=6, seed=3)
    expected = np.stack([np.arange(7.0), np.zeros(7)], axis=1)
    assert np.allclose(shifts, expected, atol=1e-12)


def test_drift_speeds_never_negative():
    model = TrajectoryModel(kind="drift", speed_mean=0.3, speed_std=1.0, angle_std=0.4)
    shifts = draw_shifts(model, k=200, seed=4)
    steps = np.linalg.norm(np.diff(shifts, axis=0), axis=1)
    assert np.all(steps >= 0)


def test_draw_shifts_deterministic():
    model = TrajectoryModel(kind="drift", speed_std=0.2, angle_std=0.3)
    a = draw_shifts(model, k=20, seed=7)
    b = draw_shifts(model, k=20, seed=7)
    assert np.array_equal(a, b)
    c = draw_shifts(model, k=20, seed=8)
    assert not np.array_equal(a, c)


def test_trajectory_model_validation():
    with pytest.raises(ValueError):
        TrajectoryModel(kind="spiral")
    with pytest.raises(ValueError):
        TrajectoryModel(half_range=0.0)
    with pytest.raises(ValueError):
        TrajectoryModel(kind="drift", speed_mean=-1.0)
    with pytest.raises(ValueError):
        TrajectoryModel(kind="drift", angle_std=-0.1)


# -- stack generation --------------------------------------------------------


def test_noiseless_zero_shift_stack_equals_truth(truth16):
    shifts = np.zeros((4, 2))
    stack = make_stack(truth16, shifts, sigma2=0.0, seed=0)
    assert stack.frames.shape == (4, 16, 16)
    for frame in stack.frames:
        assert np.allclose(frame, truth16, atol=1e-12)


def test_noiseless_integer_shift_is_roll(truth16):
    shifts = np.array([[0.0, 0.0], [3.0, 0.0]])
    stack = make_stack(truth16, shifts, sigma2=0.0, seed=0)
    assert np.allclose(stack.frames[1], np.roll(truth16, 3, axis=1), atol=1e-10)


def test_noise_variance_matches_request():
    truth = prepare_truth(dead_leaves((100, 100), seed=2))
    shifts = np.array([[0.0, 0.0], [1.25, -0.75]])
    stack = make_stack(truth, shifts, sigma2=0.25, seed=5)
    noiseless = make_stack(truth, shifts, sigma2=0.0, seed=5)
    resid = stack.frames[1] - noiseless.frames[1]
    assert resid.var() == pytest.approx(0.25, rel=0.05)


def test_noiseless_stack_exactly_consistent(truth50):
    model = TrajectoryModel(kind="iid-uniform", half_range=2.0)
    shifts = draw_shifts(model, k=5, seed=9)
    stack = make_stack(truth50, shifts, sigma2=0.0, seed=1)
    truth_spec = forward_transform(truth50)
    scale = np.max(np.abs(truth_spec))
    for frame, t in zip(stack.frames, stack.true_shifts):
        back = adjoint_unshift(forward_transform(frame), t)
        assert np.max(np.abs(back - truth_spec)) < 1e-12 * max(scale, 1.0)


def test_stack_deterministic_and_seed_sensitive(truth16):
    shifts = np.array([[0.0, 0.0], [0.5, 0.25]])
    a = make_stack(truth16, shifts, sigma2=0.1, seed=11)
    b = make_stack(truth16, shifts, sigma2=0.1, seed=11)
    c = make_stack(truth16, shifts, sigma2=0.1, seed=12)
    assert np.array_equal(a.frames, b.frames)
    assert not np.array_equal(a.frames, c.frames)


def test_stack_requires_pinned_first_shift(truth16):
    with pytest.raises(ValueError):
        make_stack(truth16, np.array([[0.5, 0.0], [1.0, 0.0]]), sigma2=0.0, seed=0)


def test_stack_records_snr(truth50):
    shifts = np.zeros((2, 2))
    stack = make_stack(truth50, shifts, sigma2=0.04, seed=0)
    assert np.isfinite(stack.snr_db)
    assert stack.snr_db == pytest.approx(measure_snr_db(truth50, 0.04))


# -- SNR measurement ---------------------------------------------------------


def test_snr_constant_truth_sentinel():
    assert measure_snr_db(np.full((8, 8), 3.0), sigma2=0.1) == -np.inf


def test_snr_drops_ten_db_per_decade(truth50):
    a = measure_snr_db(truth50, sigma2=0.01)
    b = measure_snr_db(truth50, sigma2=0.1)
    assert a - b == pytest.approx(10.0, abs=1e-9)


def test_sinusoid_gradient_energy_analytic_and_fd_oracle():
    n = 64
    k = 2
    w0 = 2 * np.pi * k / n
    x = np.arange(n)
    truth = np.sin(w0 * x)[None, :].repeat(n, axis=0)
    ge = gradient_energy(truth)
    assert ge == pytest.approx(w0**2 * truth.size / 2, rel=1e-9)
    # forward-difference oracle, circular; low frequency keeps the
    # discretization factor (2 sin(w0/2)/w0)^2 within 2% of 1
    dx = np.roll(truth, -1, axis=1) - truth
    dy = np.roll(truth, -1, axis=0) - truth
    fd = np.sum(dx**2) + np.sum(dy**2)
    assert ge == pytest.approx(fd, rel=0.02)


def test_snr_value_formula(truth50):
    sigma2 = 0.3
    expected = 10 * np.log10(gradient_energy(truth50) / (truth50.size * sigma2))
    assert measure_snr_db(truth50, sigma2) == pytest.approx(expected, rel=1e-12)


def test_snr_rejects_bad_sigma(truth16):
    with pytest.raises(ValueError):
        measure_snr_db(truth16, 0.0)
    with pytest.raises(ValueError):
        measure_snr_db(truth16, -1.0)


def test_sigma_for_snr_round_trip(truth50):
    for target in (0.0, -10.0, 17.5):
        s2 = sigma_for_snr_db(truth50, target)
        assert measure_snr_db(truth50, s2) == pytest.approx(target, abs=1e-9)


def test_sigma_ratio_between_targets(truth50):
    s_a = np.sqrt(sigma_for_snr_db(truth50, -20.0))
    s_b = np.sqrt(sigma_for_snr_db(truth50, -10.0))
    assert s_a / s_b == pytest.approx(np.sqrt(10.0), rel=1e-9)


def test_sigma_closed_form_at_plus_30(truth50):
    s2 = sigma_for_snr_db(truth50, 30.0)
    assert s2 == pytest.approx(gradient_energy(truth50) / (truth50.size * 1e3), rel=1e-12)


def test_sigma_for_constant_truth_raises():
    with pytest.raises(ValueError):
        sigma_for_snr_db(np.full((8, 8), 2.0), 0.0)


@given(st.floats(1e-4, 1e4), st.floats(1.5, 40.0))
def test_snr_monotone_in_sigma(sigma2, factor):
    truth = prepare_truth(dead_leaves((16, 16), seed=5))
    assert measure_snr_db(truth, sigma2) > measure_snr_db(truth, sigma2 * factor)


# -- truth preparation -------------------------------------------------------


def test_prepare_truth_zero_mean_and_band_limited():
    img = dead_leaves((50, 50), seed=13)
    prepared = prepare_truth(img)
    assert abs(prepared.mean()) < 1e-12
    spec = forward_transform(prepared)
    wy, wx = omega_grid(spec.shape)
    high = np.sqrt(wx**2 + wy**2) > 0.9 * np.pi
    assert np.max(np.abs(spec[high])) < 1e-12
    assert spec[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_periodic_split_solves_boundary_poisson_equation():
    # the smooth remainder s = img - p must satisfy the circular 5-point
    # Poisson equation lap(s) = b, where b holds the wraparound jumps
    img = dead_leaves((40, 40), seed=14)
    p = _periodic_component(img)
    s = img - p

    b = np.zeros_like(img)
    b[0, :] += img[-1, :] - img[0, :]
    b[-1, :] += img[0, :] - img[-1, :]
    b[:, 0] += img[:, -1] - img[:, 0]
    b[:, -1] += img[:, 0] - img[:, -1]

    lap = (
        np.roll(s, 1, axis=0)
        + np.roll(s, -1, axis=0)
        + np.roll(s, 1, axis=1)
        + np.roll(s, -1, axis=1)
        - 4.0 * s
    )
    assert np.max(np.abs(lap - b)) < 1e-10
    assert abs(s.mean()) < 1e-12


def test_periodic_split_shrinks_border_seams():
    # a ramp wraps around with a full-height jump; the split must absorb
    # nearly all of that discontinuity into the smooth remainder
    yy, xx = np.mgrid[0:40, 0:40]
    img = xx / 39.0 + 0.3 * (yy / 39.0) + 0.01 * dead_leaves((40, 40), seed=14)
    p = _periodic_component(img)

    def seam_energy(g):
        return float(
            np.sum((g[-1, :] - g[0, :]) ** 2) + np.sum((g[:, -1] - g[:, 0]) ** 2)
        )

    assert seam_energy(p) < 0.01 * seam_energy(img)


def test_prepare_truth_spectrum_stable_under_reapplied_band_limit():
    # a second band-limit plus demean pass must be a no-op
    once = prepare_truth(dead_leaves((40, 40), seed=14))
    spec = np.fft.fft2(once, norm="ortho")
    wy, wx = omega_grid(once.shape)
    spec[np.sqrt(wx**2 + wy**2) > 0.9 * np.pi] = 0.0
    spec[0, 0] = 0.0
    again = np.fft.ifft2(spec, norm="ortho").real
    assert np.max(np.abs(again - once)) < 1e-12


def test_dead_leaves_deterministic_bounded():
    a = dead_leaves((32, 32), seed=21)
    b = dead_leaves((32, 32), seed=21)
    c = dead_leaves((32, 32), seed=22)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert a.std() > 0.01
