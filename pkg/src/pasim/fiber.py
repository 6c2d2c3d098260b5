"""Dual-polarization nonlinear fiber propagation and EDFA amplification.

Propagation integrates the Manakov equation (Kerr coefficient averaged by
8/9, no PMD) with a symmetric split-step scheme: half linear step in the
frequency domain (dispersion + loss), full nonlinear phase rotation in the
time domain, half linear step. The nonlinear effective length per step is
2*sinh(alpha*h/2)/alpha, which makes the phase exact for pure SPM at any
step count and makes the backward direction an exact inverse of the
forward direction on the same step grid.

Dispersion acts on absolute frequency (grid frequency plus the waveform's
center_offset), so a channel demultiplexed to baseband keeps its walk-off
and can be backpropagated consistently.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import nl_phase_rotate
from .signals import SampledWaveform

C_LIGHT = 299792458.0  # m/s
H_PLANCK = 6.62607015e-34  # J s
REF_FREQUENCY = 193.41e12  # Hz
MANAKOV_FACTOR = 8.0 / 9.0


@dataclass(frozen=True)
class FiberSpanParams:
    length_km: float = 80.0
    dispersion_ps_nm_km: float = 17.0
    gamma_per_w_km: float = 1.3
    alpha_db_km: float = 0.2
    ref_wavelength_nm: float = 1550.0

    def __post_init__(self):
        if self.length_km <= 0 or self.ref_wavelength_nm <= 0:
            raise ValueError("span length and wavelength must be positive")

    @property
    def beta2(self):
        """Group velocity dispersion in s^2/m, from D at the reference
        wavelength: beta2 = -D * lambda^2 / (2 pi c)."""
        d_si = self.dispersion_ps_nm_km * 1e-6  # s/m^2
        lam = self.ref_wavelength_nm * 1e-9
        return -d_si * lam ** 2 / (2.0 * np.pi * C_LIGHT)

    @property
    def alpha(self):
        """Power attenuation in 1/m."""
        return self.alpha_db_km * np.log(10.0) / 10.0 / 1e3

    @property
    def gamma(self):
        """Kerr coefficient in 1/(W m)."""
        return self.gamma_per_w_km * 1e-3

    @property
    def loss_db(self):
        return self.alpha_db_km * self.length_km


@dataclass(frozen=True)
class StepPolicy:
    """Either a constant step in km, or a bound on the nonlinear phase
    accumulated per step (whichever the configuration sets)."""
    h_km: float | None = 0.1
    max_phase_rad: float | None = None

    def n_steps(self, span: FiberSpanParams, peak_power):
        length = span.length_km * 1e3
        n = 1
        if self.h_km is not None:
            n = max(n, int(np.ceil(span.length_km / self.h_km - 1e-9)))
        if self.max_phase_rad is not None and peak_power > 0:
            phi_total = span.gamma * MANAKOV_FACTOR * peak_power * length
            n = max(n, int(np.ceil(phi_total / self.max_phase_rad)))
        return n


def _omega_abs(length, sample_rate, center_offset):
    f = np.fft.fftfreq(length, 1.0 / sample_rate)
    return 2.0 * np.pi * (f + center_offset)


def ssfm_span(wave: SampledWaveform, span: FiberSpanParams,
              step_policy: StepPolicy, direction="forward") -> SampledWaveform:
    """Propagate one span with the symmetric split-step scheme.

    The backward direction negates dispersion, nonlinearity, and loss,
    inverting the forward pass exactly on the same step grid (for digital
    backpropagation).
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = 1.0 if direction == "forward" else -1.0

    peak = float(np.max(np.abs(wave.x_pol) ** 2 + np.abs(wave.y_pol) ** 2,
                        initial=0.0))
    n_steps = step_policy.n_steps(span, peak)
    h = span.length_km * 1e3 / n_steps

    beta2 = sign * span.beta2
    gamma = sign * span.gamma
    alpha = sign * span.alpha

    omega = _omega_abs(wave.n_samples, wave.sample_rate, wave.center_offset)
    half_lin = np.exp(
        (-alpha / 2.0 + 0.5j * beta2 * omega ** 2) * (h / 2.0)
    )
    full_lin = half_lin * half_lin
    # exact effective length for the midpoint nonlinear phase under loss
    if span.alpha > 0.0:
        h_nl = 2.0 * np.sinh(span.alpha * h / 2.0) / span.alpha
    else:
        h_nl = h
    nl_factor = gamma * MANAKOV_FACTOR * h_nl

    ex = np.ascontiguousarray(wave.x_pol, dtype=np.complex128).copy()
    ey = np.ascontiguousarray(wave.y_pol, dtype=np.complex128).copy()

    fx = np.fft.fft(ex)
    fy = np.fft.fft(ey)
    for step in range(n_steps):
        lin = half_lin if step == 0 else full_lin
        fx *= lin
        fy *= lin
        ex = np.fft.ifft(fx)
        ey = np.fft.ifft(fy)
        nl_phase_rotate(ex, ey, nl_factor)
        if not (np.isfinite(ex[0]) and np.isfinite(ey[0])):
            raise FloatingPointError("non-finite samples during propagation")
        fx = np.fft.fft(ex)
        fy = np.fft.fft(ey)
    fx *= half_lin
    fy *= half_lin
    ex = np.fft.ifft(fx)
    ey = np.fft.ifft(fy)
    if not np.all(np.isfinite(ex)) or not np.all(np.isfinite(ey)):
        raise FloatingPointError("non-finite samples after propagation")

    return SampledWaveform(ex, ey, wave.sample_rate, wave.center_offset,
                           wave.time_origin)


def edfa(wave: SampledWaveform, gain_db, noise_figure_db,
         rng=None) -> SampledWaveform:
    """Flat-gain amplifier with circular complex white ASE.

    Per-polarization ASE power spectral density is (G-1)*h*nu*n_sp with
    n_sp = 10^(NF/10)/2; total per-polarization noise power is PSD times
    the simulation sample rate.
    """
    g = 10.0 ** (gain_db / 10.0)
    x = wave.x_pol * np.sqrt(g)
    y = wave.y_pol * np.sqrt(g)
    if rng is not None and noise_figure_db is not None and g > 1.0:
        n_sp = 10.0 ** (noise_figure_db / 10.0) / 2.0
        psd = (g - 1.0) * H_PLANCK * REF_FREQUENCY * n_sp
        p_noise = psd * wave.sample_rate
        sigma = np.sqrt(p_noise / 2.0)
        n = wave.n_samples
        x = x + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = y + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return SampledWaveform(x, y, wave.sample_rate, wave.center_offset,
                           wave.time_origin)


@dataclass(frozen=True)
class LinkConfig:
    span: FiberSpanParams = FiberSpanParams()
    n_spans: int = 15
    edfa_noise_figure_db: float = 5.0
    step_policy: StepPolicy = StepPolicy()

    def __post_init__(self):
        if self.n_spans < 0:
            raise ValueError("n_spans must be nonnegative")


def propagate_link(wave: SampledWaveform, link: LinkConfig, rng,
                   checkpoint_sink=None) -> SampledWaveform:
    """n_spans times (fiber span, then EDFA recovering the span loss).

    One independent RNG stream per span keeps results identical for any
    worker count. checkpoint_sink, if given, is called with
    (span_index, waveform) after each amplifier.
    """
    span_rngs = rng.spawn(link.n_spans) if link.n_spans > 0 else []
    out = wave
    for i in range(link.n_spans):
        out = ssfm_span(out, link.span, link.step_policy, "forward")
        out = edfa(out, link.span.loss_db, link.edfa_noise_figure_db,
                   span_rngs[i])
        if checkpoint_sink is not None:
            checkpoint_sink(i, out)
    return out
