"""Pure-numpy reference implementations of the hot kernels.

The compiled module mirrors these exactly (same operation order, same
floor-based decision rule), so both backends agree to floating-point
round-off and ties resolve identically.
"""

import numpy as np


def nl_phase_rotate(ex, ey, factor):
    """In-place Kerr phase rotation: both polarizations rotate by
    factor * (|ex|^2 + |ey|^2)."""
    phi = factor * (ex.real ** 2 + ex.imag ** 2 + ey.real ** 2 + ey.imag ** 2)
    rot = np.exp(1j * phi)
    ex *= rot
    ey *= rot


def _decide(values, max_level):
    o = 2.0 * np.floor(values / 2.0) + 1.0
    return np.clip(o, -max_level, max_level)


def bps_best_angle(r, phasors, half_window, max_level):
    """Index of the test angle minimizing the windowed decision error.

    For each candidate phasor p_b, the per-symbol squared distance between
    r*p_b and its nearest constellation point is summed over a sliding
    window of 2*half_window+1 symbols (truncated at the edges); the winner
    per symbol is the first angle attaining the minimum.
    """
    n = r.size
    rot = r[:, None] * phasors[None, :]
    dre = rot.real - _decide(rot.real, max_level)
    dim = rot.imag - _decide(rot.imag, max_level)
    d = dre * dre + dim * dim
    pref = np.empty((n + 1, phasors.size))
    pref[0] = 0.0
    np.cumsum(d, axis=0, out=pref[1:])
    idx = np.arange(n)
    lo = np.maximum(idx - half_window, 0)
    hi = np.minimum(idx + half_window, n - 1)
    win = pref[hi + 1] - pref[lo]
    return np.argmin(win, axis=1).astype(np.int32)


def unwrap_track(raw, period):
    """Pull each raw estimate onto the branch nearest its predecessor.

    Rounding is floor(x + 0.5), not banker's rounding, so ties at exact
    half-periods resolve identically in both backends.
    """
    out = np.empty_like(raw)
    prev = 0.0
    for i in range(raw.size):
        out[i] = raw[i] + np.floor((prev - raw[i]) / period + 0.5) * period
        prev = out[i]
    return out
