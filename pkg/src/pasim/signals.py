"""Signal containers shared across the pipeline, plus a binary waveform dump.

A SampledWaveform is a cyclic block of complex baseband samples per
polarization. center_offset records where the block sits relative to the
simulation band center, so dispersion operators can act on absolute
frequency after a channel has been shifted to baseband.
"""

import struct
from dataclasses import dataclass, field, replace

import numpy as np

_DUMP_MAGIC = b"PWV1"


@dataclass
class SampledWaveform:
    x_pol: np.ndarray
    y_pol: np.ndarray
    sample_rate: float
    center_offset: float = 0.0
    time_origin: float = 0.0

    def __post_init__(self):
        if self.x_pol.shape != self.y_pol.shape:
            raise ValueError("polarizations must have equal length")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_samples(self):
        return self.x_pol.size

    def copy(self):
        return replace(self, x_pol=self.x_pol.copy(), y_pol=self.y_pol.copy())

    def power(self):
        """Mean total power over both polarizations (W for fields in sqrt(W))."""
        return float(np.mean(np.abs(self.x_pol) ** 2 + np.abs(self.y_pol) ** 2))

    def energy(self):
        return float(np.sum(np.abs(self.x_pol) ** 2 + np.abs(self.y_pol) ** 2))

    def scaled(self, factor):
        return replace(self, x_pol=self.x_pol * factor, y_pol=self.y_pol * factor)


@dataclass
class DualPolSymbolFrame:
    x: np.ndarray
    y: np.ndarray
    bits_x: np.ndarray | None = None
    bits_y: np.ndarray | None = None
    amp_pmf: np.ndarray | None = None
    hx_bits: float | None = None
    priors_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise ValueError("polarizations must have equal length")

    @property
    def n_symbols(self):
        return self.x.size

    def copy(self):
        return replace(self, x=self.x.copy(), y=self.y.copy())

    def rotated(self, phase_x, phase_y):
        return replace(
            self,
            x=self.x * np.exp(-1j * np.asarray(phase_x)),
            y=self.y * np.exp(-1j * np.asarray(phase_y)),
        )


def dump_waveform(wave: SampledWaveform, path):
    """Write a waveform to a simple binary dump.

    Header: magic, sample_rate (f64), length (u64), pol count (u32).
    Body: interleaved complex64 pairs (x0, y0, x1, y1, ...).
    """
    body = np.empty(2 * wave.n_samples, dtype=np.complex64)
    body[0::2] = wave.x_pol.astype(np.complex64)
    body[1::2] = wave.y_pol.astype(np.complex64)
    with open(path, "wb") as f:
        f.write(_DUMP_MAGIC)
        f.write(struct.pack("<dQI", wave.sample_rate, wave.n_samples, 2))
        f.write(body.tobytes())


def load_waveform(path) -> SampledWaveform:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _DUMP_MAGIC:
            raise ValueError(f"not a waveform dump: bad magic {magic!r}")
        sample_rate, length, n_pol = struct.unpack("<dQI", f.read(20))
        if n_pol != 2:
            raise ValueError(f"unsupported polarization count {n_pol}")
        body = np.frombuffer(f.read(), dtype=np.complex64)
    if body.size != n_pol * length:
        raise ValueError("truncated waveform dump")
    return SampledWaveform(
        x_pol=body[0::2].astype(np.complex128),
        y_pol=body[1::2].astype(np.complex128),
        sample_rate=sample_rate,
    )
