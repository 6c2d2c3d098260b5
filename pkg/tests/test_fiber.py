import numpy as np
import pytest

from pasim import qam
from pasim.fiber import (
    H_PLANCK,
    MANAKOV_FACTOR,
    REF_FREQUENCY,
    FiberSpanParams,
    LinkConfig,
    StepPolicy,
    edfa,
    propagate_link,
    ssfm_span,
)
from pasim.frontend import BAUD_RATE, GridPlan, channel_demux, modulate, \
    rrc_taps, sample_symbols, wdm_mux
from pasim.signals import DualPolSymbolFrame, SampledWaveform


def random_wave(n, rng, sps=4, power=1e-3):
    """Bandlimited random waveform (RRC-shaped QAM) at a given mean power."""
    levels = qam.LEVELS.astype(float)
    pick = lambda: rng.choice(levels, n) + 1j * rng.choice(levels, n)
    frame = DualPolSymbolFrame(x=pick(), y=pick())
    pulse = rrc_taps(0.1, sps, 64)
    wave = modulate(frame, pulse, sps)
    return wave.scaled(np.sqrt(power / wave.power()))


def rms(a, b):
    return float(np.sqrt(np.mean(np.abs(a.x_pol - b.x_pol) ** 2
                                 + np.abs(a.y_pol - b.y_pol) ** 2)))


def test_span_parameters():
    span = FiberSpanParams()
    assert span.beta2 == pytest.approx(-21.67e-27, rel=1e-3)
    assert span.alpha == pytest.approx(4.605e-5, rel=1e-3)
    assert span.gamma == pytest.approx(1.3e-3)
    assert span.loss_db == pytest.approx(16.0)
    with pytest.raises(ValueError):
        FiberSpanParams(length_km=0)


def test_step_policy():
    span = FiberSpanParams()
    assert StepPolicy(h_km=0.1).n_steps(span, 1.0) == 800
    assert StepPolicy(h_km=0.25).n_steps(span, 1.0) == 320
    # phase bound: gamma*8/9*P*L = 1.3e-3*(8/9)*0.01*80e3 = 0.9244 rad
    pol = StepPolicy(h_km=None, max_phase_rad=0.1)
    assert pol.n_steps(span, 0.01) == 10
    assert pol.n_steps(span, 0.0) == 1


def test_spm_closed_form_lossless():
    """D=0, alpha=0: pure SPM has the closed form exp(j*gamma*(8/9)*P*L),
    and the scheme reproduces it exactly at any step count."""
    span = FiberSpanParams(dispersion_ps_nm_km=0.0, alpha_db_km=0.0)
    rng = np.random.default_rng(0)
    wave = random_wave(256, rng, power=5e-3)
    p = np.abs(wave.x_pol) ** 2 + np.abs(wave.y_pol) ** 2
    phi = span.gamma * MANAKOV_FACTOR * p * span.length_km * 1e3
    expect_x = wave.x_pol * np.exp(1j * phi)
    expect_y = wave.y_pol * np.exp(1j * phi)
    for h in (80.0, 7.0):
        out = ssfm_span(wave, span, StepPolicy(h_km=h))
        assert np.max(np.abs(out.x_pol - expect_x)
                      / np.max(np.abs(expect_x))) < 1e-6
        assert np.max(np.abs(out.y_pol - expect_y)
                      / np.max(np.abs(expect_y))) < 1e-6


def test_spm_closed_form_with_loss():
    """D=0, alpha>0: the sinh effective step length telescopes to the
    exact effective length (1-exp(-alpha*L))/alpha for any step count."""
    span = FiberSpanParams(dispersion_ps_nm_km=0.0)
    rng = np.random.default_rng(1)
    wave = random_wave(256, rng, power=5e-3)
    alpha, length = span.alpha, span.length_km * 1e3
    l_eff = (1.0 - np.exp(-alpha * length)) / alpha
    p = np.abs(wave.x_pol) ** 2 + np.abs(wave.y_pol) ** 2
    phi = span.gamma * MANAKOV_FACTOR * p * l_eff
    att = np.exp(-alpha * length / 2.0)
    expect_x = wave.x_pol * att * np.exp(1j * phi)
    for h in (80.0, 5.0):
        out = ssfm_span(wave, span, StepPolicy(h_km=h))
        assert np.max(np.abs(out.x_pol - expect_x)
                      / np.max(np.abs(expect_x))) < 1e-6


def test_linear_allpass_roundtrip():
    """gamma=0, alpha=0: dispersion-only span is all-pass and the backward
    pass inverts it."""
    span = FiberSpanParams(gamma_per_w_km=0.0, alpha_db_km=0.0)
    rng = np.random.default_rng(2)
    wave = random_wave(512, rng)
    pol = StepPolicy(h_km=10.0)
    out = ssfm_span(wave, span, pol)
    assert out.energy() == pytest.approx(wave.energy(), rel=1e-12)
    back = ssfm_span(out, span, pol, "backward")
    assert rms(back, wave) < 1e-9 * np.sqrt(wave.power())


def test_energy_conserved_lossless_nonlinear():
    span = FiberSpanParams(alpha_db_km=0.0)
    rng = np.random.default_rng(3)
    wave = random_wave(512, rng, power=10e-3)
    out = ssfm_span(wave, span, StepPolicy(h_km=1.0))
    assert abs(out.energy() / wave.energy() - 1.0) < 1e-6


def test_backward_inverts_forward():
    span = FiberSpanParams()
    rng = np.random.default_rng(4)
    wave = random_wave(512, rng, power=20e-3)
    pol = StepPolicy(h_km=2.0)
    out = ssfm_span(wave, span, pol)
    back = ssfm_span(out, span, pol, "backward")
    assert rms(back, wave) / np.sqrt(wave.power()) < 1e-9


def test_step_convergence_second_order():
    """Halving the step shrinks the step-to-step difference about 4x."""
    span = FiberSpanParams()
    rng = np.random.default_rng(5)
    wave = random_wave(1024, rng, sps=8, power=50e-3)
    outs = {h: ssfm_span(wave, span, StepPolicy(h_km=h))
            for h in (8.0, 4.0, 2.0)}
    e_coarse = rms(outs[8.0], outs[4.0])
    e_fine = rms(outs[4.0], outs[2.0])
    assert 3.0 < e_coarse / e_fine < 5.0


def test_walkoff_uses_absolute_frequency():
    """A channel at center_offset f and the same channel modulated at an
    offset carrier accumulate the same net dispersion."""
    span = FiberSpanParams(gamma_per_w_km=0.0, alpha_db_km=0.0)
    rng = np.random.default_rng(6)
    wave = random_wave(256, rng, sps=8)
    base = ssfm_span(wave, span, StepPolicy(h_km=80.0))
    shifted = wave.copy()
    shifted.center_offset = 75e9
    moved = ssfm_span(shifted, span, StepPolicy(h_km=80.0))
    # the offset adds a walk-off term exp(j*beta2*L*(2pi f)*omega + const)
    omega = 2 * np.pi * np.fft.fftfreq(wave.n_samples, 1 / wave.sample_rate)
    two_pi_f = 2 * np.pi * 75e9
    extra = np.exp(0.5j * span.beta2 * span.length_km * 1e3
                   * (2 * two_pi_f * omega + two_pi_f ** 2))
    predicted = np.fft.ifft(np.fft.fft(base.x_pol) * extra)
    assert np.max(np.abs(moved.x_pol - predicted)) < 1e-9 * np.max(
        np.abs(wave.x_pol))


def test_ssfm_validation():
    wave = random_wave(64, np.random.default_rng(7))
    with pytest.raises(ValueError, match="direction"):
        ssfm_span(wave, FiberSpanParams(), StepPolicy(), "sideways")


def test_edfa_gain_and_noiseless():
    rng = np.random.default_rng(8)
    wave = random_wave(256, rng, power=1e-3)
    out = edfa(wave, 16.0, None, rng)
    assert out.power() == pytest.approx(10 ** 1.6 * wave.power(), rel=1e-12)
    silent = edfa(wave, 16.0, 5.0, None)
    assert silent.power() == pytest.approx(10 ** 1.6 * wave.power(), rel=1e-12)
    unity = edfa(wave, 0.0, 5.0, rng)
    assert unity.power() == pytest.approx(wave.power(), rel=1e-12)


def test_edfa_ase_power_calibration():
    """ASE power vs (G-1)*h*nu*n_sp*fs within 1%, per polarization."""
    n = 1 << 20
    fs = 250e9
    dark = SampledWaveform(np.zeros(n, complex), np.zeros(n, complex), fs)
    gain_db, nf_db = 16.0, 5.0
    out = edfa(dark, gain_db, nf_db, np.random.default_rng(9))
    g = 10 ** (gain_db / 10)
    n_sp = 10 ** (nf_db / 10) / 2
    expected = (g - 1) * H_PLANCK * REF_FREQUENCY * n_sp * fs
    for pol in (out.x_pol, out.y_pol):
        assert np.mean(np.abs(pol) ** 2) == pytest.approx(expected, rel=0.01)
        # circular: equal quadrature variances, vanishing pseudo-variance
        vr, vi = np.var(pol.real), np.var(pol.imag)
        assert vr == pytest.approx(vi, rel=0.02)
        assert abs(np.mean(pol ** 2)) / np.var(pol) < 0.01
    # white: neighbor correlation is at the statistical floor
    x = out.x_pol
    corr = np.abs(np.vdot(x[:-1], x[1:])) / np.vdot(x, x).real
    assert corr < 0.01


def test_propagate_link_zero_spans_and_determinism():
    wave = random_wave(256, np.random.default_rng(10))
    link0 = LinkConfig(n_spans=0)
    out0 = propagate_link(wave, link0, np.random.default_rng(0))
    assert rms(out0, wave) == 0.0

    link = LinkConfig(span=FiberSpanParams(), n_spans=3,
                      step_policy=StepPolicy(h_km=5.0))
    a = propagate_link(wave, link, np.random.default_rng(42))
    b = propagate_link(wave, link, np.random.default_rng(42))
    assert np.array_equal(a.x_pol, b.x_pol)
    assert np.array_equal(a.y_pol, b.y_pol)
    c = propagate_link(wave, link, np.random.default_rng(43))
    assert not np.array_equal(c.x_pol, a.x_pol)


def test_propagate_link_checkpoints():
    wave = random_wave(64, np.random.default_rng(11))
    seen = []
    link = LinkConfig(n_spans=2, step_policy=StepPolicy(h_km=20.0))
    propagate_link(wave, link, np.random.default_rng(0),
                   checkpoint_sink=lambda i, w: seen.append((i, w.power())))
    assert [i for i, _ in seen] == [0, 1]


def test_linear_regime_link_snr():
    """At negligible launch power the received SNR equals Es over the
    accumulated ASE within 0.3 dB."""
    plan = GridPlan(n_channels=1)
    sps = plan.samples_per_symbol_sim
    pulse = rrc_taps(plan.rolloff, sps, 64)
    rng = np.random.default_rng(12)
    levels = qam.LEVELS.astype(float)
    n_sym = 1 << 14
    pick = lambda: rng.choice(levels, n_sym) + 1j * rng.choice(levels, n_sym)
    frame = DualPolSymbolFrame(x=pick(), y=pick())
    wave = wdm_mux([modulate(frame, pulse, sps)], plan)
    scale = np.sqrt(1e-6 / wave.power())  # -30 dBm: nonlinearity negligible
    wave = wave.scaled(scale)

    link = LinkConfig(n_spans=5, step_policy=StepPolicy(h_km=10.0))
    rx_wave = propagate_link(wave, link, np.random.default_rng(99))

    # ideal EDC then matched filtering
    from pasim.dsp import edc
    total_disp = link.span.beta2 * link.span.length_km * 1e3 * link.n_spans
    rx_wave = edc(rx_wave, total_disp)
    ch = channel_demux(rx_wave, 0.0, pulse, 4, plan=plan)
    rx = sample_symbols(ch, 4).x / scale

    g = 10 ** (link.span.loss_db / 10)
    n_sp = 10 ** (link.edfa_noise_figure_db / 10) / 2
    psd = link.n_spans * (g - 1) * H_PLANCK * REF_FREQUENCY * n_sp
    es = np.mean(np.abs(frame.x) ** 2)
    snr_pred = es * scale ** 2 / (psd * plan.sample_rate)
    err = np.mean(np.abs(rx - frame.x) ** 2) * scale ** 2
    snr_meas = es * scale ** 2 / err
    assert 10 * np.log10(snr_meas) == pytest.approx(
        10 * np.log10(snr_pred), abs=0.3)
