"""Receiver-side compensation: EDC, digital backpropagation, and carrier
phase recovery (blind phase search or mean phase rotation).

BPS follows the feedforward search structure: every symbol is tested
against a grid of candidate rotations, the decision error is averaged over
a sliding window, and the winning angle is unwrapped across the pi/2
rotational ambiguity of the square constellation.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import qam
from ._kernels import bps_best_angle, unwrap_track
from .fiber import LinkConfig, ssfm_span
from .signals import DualPolSymbolFrame, SampledWaveform


@dataclass(frozen=True)
class BpsConfig:
    half_window: int = 24
    n_test_angles: int = 64
    angle_range: float = np.pi / 2.0

    def __post_init__(self):
        if self.half_window < 1:
            raise ValueError("half_window must be >= 1")
        if self.n_test_angles < 2:
            raise ValueError("need at least two test angles")

    def angles(self):
        b = np.arange(self.n_test_angles)
        return -self.angle_range / 2.0 + b * self.angle_range / self.n_test_angles


@dataclass
class PhaseTrack:
    phase_x: np.ndarray
    phase_y: np.ndarray

    def max_jump(self):
        jumps = [np.max(np.abs(np.diff(p)), initial=0.0)
                 for p in (self.phase_x, self.phase_y)]
        return float(max(jumps))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["symbol_index", "phase_x", "phase_y"])
            for i, (px, py) in enumerate(zip(self.phase_x, self.phase_y)):
                writer.writerow([i, repr(float(px)), repr(float(py))])


def edc(wave: SampledWaveform, total_dispersion) -> SampledWaveform:
    """Inverse of accumulated dispersion (total_dispersion = beta2 * L, in
    s^2), applied on absolute frequency so walk-off is removed too."""
    f = np.fft.fftfreq(wave.n_samples, 1.0 / wave.sample_rate)
    omega = 2.0 * np.pi * (f + wave.center_offset)
    op = np.exp(-0.5j * total_dispersion * omega ** 2)
    return SampledWaveform(
        np.fft.ifft(np.fft.fft(wave.x_pol) * op),
        np.fft.ifft(np.fft.fft(wave.y_pol) * op),
        wave.sample_rate,
        wave.center_offset,
        wave.time_origin,
    )


def dbp(wave: SampledWaveform, link: LinkConfig) -> SampledWaveform:
    """Ideal per-channel digital backpropagation: undo each amplifier's
    gain and run the span backward, in reverse span order."""
    out = wave
    gain = np.sqrt(10.0 ** (link.span.loss_db / 10.0))
    for _ in range(link.n_spans):
        out = out.scaled(1.0 / gain)
        out = ssfm_span(out, link.span, link.step_policy, "backward")
    return out


def bps(frame: DualPolSymbolFrame, cfg: BpsConfig,
        max_level=None) -> tuple[DualPolSymbolFrame, PhaseTrack]:
    """Blind phase search over the square constellation grid.

    Per polarization: rotate by each test angle, take the squared distance
    to the nearest constellation point, sum it over a (2*half_window+1)
    sliding window truncated at the frame edges, pick the angle minimizing
    the sum, then unwrap by pulling each estimate onto the pi/2 branch
    nearest its predecessor.
    """
    if frame.n_symbols == 0:
        raise ValueError("empty frame")
    if max_level is None:
        max_level = float(qam.LEVELS[-1])
    angles = cfg.angles()
    phasors = np.ascontiguousarray(np.exp(-1j * angles))
    tracks = []
    outs = []
    for r in (frame.x, frame.y):
        r = np.ascontiguousarray(r, dtype=np.complex128)
        best = bps_best_angle(r, phasors, int(cfg.half_window), float(max_level))
        raw = angles[best]
        track = unwrap_track(np.ascontiguousarray(raw), np.pi / 2.0)
        tracks.append(track)
        outs.append(r * np.exp(-1j * track))
    out_frame = DualPolSymbolFrame(
        x=outs[0], y=outs[1],
        bits_x=frame.bits_x, bits_y=frame.bits_y,
        amp_pmf=frame.amp_pmf, hx_bits=frame.hx_bits,
        priors_meta=frame.priors_meta,
    )
    return out_frame, PhaseTrack(tracks[0], tracks[1])


def agc(frame: DualPolSymbolFrame, x_ref_power,
        y_ref_power=None) -> DualPolSymbolFrame:
    """Scale each polarization to a reference mean symbol power.

    Hard-decision stages (blind phase search) need the constellation on
    its nominal grid. One real gain per polarization, matching the known
    transmit power, is the blind analogue of an automatic gain control;
    it leaves phase untouched.
    """
    if y_ref_power is None:
        y_ref_power = x_ref_power
    px = float(np.mean(np.abs(frame.x) ** 2))
    py = float(np.mean(np.abs(frame.y) ** 2))
    if px <= 0.0 or py <= 0.0:
        raise ValueError("cannot normalize an all-zero frame")
    return DualPolSymbolFrame(
        x=frame.x * np.sqrt(x_ref_power / px),
        y=frame.y * np.sqrt(y_ref_power / py),
    )


def mpr(frame_rx: DualPolSymbolFrame,
        frame_tx: DualPolSymbolFrame) -> DualPolSymbolFrame:
    """Remove one average phase per polarization (data-aided)."""
    if frame_rx.n_symbols != frame_tx.n_symbols:
        raise ValueError("frames must have equal length")
    phases = []
    for r, x in ((frame_rx.x, frame_tx.x), (frame_rx.y, frame_tx.y)):
        corr = np.sum(r * np.conj(x))
        if corr == 0:
            raise ValueError("zero cross-correlation: phase undefined")
        phases.append(np.angle(corr))
    return frame_rx.rotated(phases[0], phases[1])


def wiener_phase(n, linewidth_times_t, rng) -> PhaseTrack:
    """Random-walk phase with per-symbol increment variance
    2*pi*linewidth_times_t (synthetic test stimulus; the transmission
    chain itself models no laser phase noise)."""
    if linewidth_times_t < 0:
        raise ValueError("linewidth must be nonnegative")
    sigma = np.sqrt(2.0 * np.pi * linewidth_times_t)
    tracks = [np.cumsum(sigma * rng.standard_normal(n)) for _ in range(2)]
    return PhaseTrack(tracks[0], tracks[1])
