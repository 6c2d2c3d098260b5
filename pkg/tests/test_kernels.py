"""The compiled kernels must agree with the pure-Python reference bitwise
in selection (argmin indices, unwrap branches) and to round-off in
floating point, so results do not depend on which backend is active."""

import os
import subprocess
import sys

import numpy as np
import pytest

from pasim._kernels import BACKEND, _ref

try:
    from pasim._kernels import _core
except ImportError:
    _core = None

needs_compiled = pytest.mark.skipif(
    _core is None, reason="compiled kernels not built")


def random_symbols(n, rng, noise=0.0):
    levels = np.arange(-15, 16, 2, dtype=float)
    r = rng.choice(levels, n) + 1j * rng.choice(levels, n)
    if noise:
        r = r + noise * (rng.standard_normal(n)
                         + 1j * rng.standard_normal(n))
    return np.ascontiguousarray(r, dtype=np.complex128)


def test_backend_selection_env():
    env = dict(os.environ, PASIM_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c",
         "from pasim._kernels import BACKEND; print(BACKEND)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
def test_backend_default_is_compiled():
    assert BACKEND == "compiled"


def test_ref_nl_phase_rotate_is_pure_phase():
    rng = np.random.default_rng(0)
    ex = np.ascontiguousarray(rng.standard_normal(64)
                              + 1j * rng.standard_normal(64))
    ey = np.ascontiguousarray(rng.standard_normal(64)
                              + 1j * rng.standard_normal(64))
    keep_x, keep_y = np.abs(ex).copy(), np.abs(ey).copy()
    phi = 0.3 * (np.abs(ex) ** 2 + np.abs(ey) ** 2)
    want_x = ex * np.exp(1j * phi)
    _ref.nl_phase_rotate(ex, ey, 0.3)
    assert np.allclose(np.abs(ex), keep_x)
    assert np.allclose(np.abs(ey), keep_y)
    assert np.allclose(ex, want_x, atol=1e-12)


@needs_compiled
def test_nl_phase_rotate_backends_agree():
    rng = np.random.default_rng(1)
    base_x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    base_y = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    ax, ay = base_x.copy(), base_y.copy()
    bx, by = base_x.copy(), base_y.copy()
    _ref.nl_phase_rotate(ax, ay, 0.7)
    _core.nl_phase_rotate(bx, by, 0.7)
    assert np.max(np.abs(ax - bx)) < 1e-13 * np.max(np.abs(ax))
    assert np.max(np.abs(ay - by)) < 1e-13 * np.max(np.abs(ay))


@needs_compiled
@pytest.mark.parametrize("noise,half_window", [(0.0, 1), (0.4, 16),
                                               (1.5, 24), (0.8, 4096)])
def test_bps_backends_identical_selection(noise, half_window):
    """Argmin indices must match exactly, including tie handling and the
    truncated windows at the frame edges."""
    rng = np.random.default_rng(2)
    r = random_symbols(2048, rng, noise=noise)
    r *= np.exp(1j * 0.2)
    angles = -np.pi / 4 + np.arange(64) * np.pi / 128
    phasors = np.ascontiguousarray(np.exp(-1j * angles))
    a = _ref.bps_best_angle(r, phasors, half_window, 15.0)
    b = _core.bps_best_angle(r, phasors, half_window, 15.0)
    assert np.array_equal(a, b)


@needs_compiled
def test_unwrap_backends_identical():
    rng = np.random.default_rng(3)
    raw = rng.uniform(-np.pi / 4, np.pi / 4, 4096)
    # include exact half-period ties, where rounding convention matters
    raw[100] = raw[99] + np.pi / 4
    raw[101] = raw[100] - np.pi / 4
    a = _ref.unwrap_track(np.ascontiguousarray(raw), np.pi / 2)
    b = _core.unwrap_track(np.ascontiguousarray(raw), np.pi / 2)
    assert np.array_equal(a, b)


def test_unwrap_pulls_to_nearest_branch():
    raw = np.array([0.0, 0.1, -0.7, -0.75, 0.7])
    out = _ref.unwrap_track(raw, np.pi / 2)
    assert np.max(np.abs(np.diff(out))) < np.pi / 4 + 1e-12
    assert np.allclose((out - raw) % (np.pi / 2), 0.0, atol=1e-12)


def test_bps_window_sum_constant_offset_invariance():
    """Adding a constant to every window sum cannot change the selected
    angles (first-minimum argmin over shifted scores)."""
    rng = np.random.default_rng(4)
    r = random_symbols(512, rng, noise=0.5)
    angles = -np.pi / 4 + np.arange(64) * np.pi / 128
    phasors = np.exp(-1j * angles)
    half_window = 8

    rot = r[:, None] * phasors[None, :]
    dec = (2.0 * np.floor(rot.real / 2.0) + 1.0).clip(-15, 15) \
        + 1j * (2.0 * np.floor(rot.imag / 2.0) + 1.0).clip(-15, 15)
    d = np.abs(rot - dec) ** 2
    pref = np.vstack([np.zeros(64), np.cumsum(d, axis=0)])
    n = r.size
    lo = np.maximum(np.arange(n) - half_window, 0)
    hi = np.minimum(np.arange(n) + half_window, n - 1)
    win = pref[hi + 1] - pref[lo]

    baseline = np.argmin(win, axis=1)
    shifted = np.argmin(win + 123.456, axis=1)
    assert np.array_equal(baseline, shifted)
    kernel = _ref.bps_best_angle(r, np.ascontiguousarray(phasors),
                                 half_window, 15.0)
    assert np.array_equal(kernel, baseline)
