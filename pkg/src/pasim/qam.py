"""Square 256-QAM constellation: levels, Gray bit labels, hard decisions.

Each dimension (I or Q) carries one of 16 odd levels {-15, ..., +15} and is
labeled with 4 bits: one sign bit (MSB) followed by 3 amplitude bits in
binary-reflected Gray order over ascending amplitudes. A 2D symbol therefore
carries 8 bits, I-dimension bits first.
"""

import numpy as np

M_AMP = 8
AMPLITUDES = np.arange(1, 2 * M_AMP, 2)          # 1, 3, ..., 15
LEVELS = np.arange(-(2 * M_AMP - 1), 2 * M_AMP, 2)  # -15, -13, ..., 15
BITS_PER_DIM = 4
BITS_PER_SYMBOL = 2 * BITS_PER_DIM


def gray_code(i):
    """Binary-reflected Gray code of integer index i."""
    return i ^ (i >> 1)


def _amp_bits(amp_index, width=3):
    g = gray_code(int(amp_index))
    return [(g >> (width - 1 - b)) & 1 for b in range(width)]


def dim_bits(level):
    """4-bit label of one odd level: [sign, gray2, gray1, gray0]."""
    sign = 1 if level < 0 else 0
    idx = (abs(int(level)) - 1) // 2
    return np.array([sign] + _amp_bits(idx), dtype=np.uint8)


def _build_constellation():
    points = np.empty(256, dtype=np.complex128)
    labels = np.empty((256, BITS_PER_SYMBOL), dtype=np.uint8)
    n = 0
    for li in LEVELS:
        for lq in LEVELS:
            points[n] = li + 1j * lq
            labels[n, :4] = dim_bits(li)
            labels[n, 4:] = dim_bits(lq)
            n += 1
    return points, labels


POINTS, LABELS = _build_constellation()


def decide_levels(values):
    """Nearest odd-integer level, elementwise on a real array.

    Uses a floor-based rule (ties at even integers round up) so the result
    is bit-identical across vectorized and compiled implementations.
    """
    o = 2.0 * np.floor(values / 2.0) + 1.0
    return np.clip(o, LEVELS[0], LEVELS[-1])


def decide_symbols(symbols):
    """Nearest 256-QAM point for each complex sample."""
    return decide_levels(symbols.real) + 1j * decide_levels(symbols.imag)


def symbol_bits(symbols):
    """Bit labels (n, 8) of constellation symbols lying exactly on the grid."""
    sym = np.asarray(symbols)
    bits = np.empty((sym.size, BITS_PER_SYMBOL), dtype=np.uint8)
    for k, s in enumerate(sym.ravel()):
        bits[k, :4] = dim_bits(int(round(s.real)))
        bits[k, 4:] = dim_bits(int(round(s.imag)))
    return bits


def point_log_priors(amp_pmf):
    """Log-priors over the 256 points from a per-amplitude pmf.

    Signs are uniform, so P(point) = pmf[|I|] * pmf[|Q|] / 4.
    """
    pmf = np.asarray(amp_pmf, dtype=np.float64)
    if pmf.shape != (M_AMP,):
        raise ValueError(f"amplitude pmf must have {M_AMP} entries")
    idx_i = (np.abs(POINTS.real).astype(np.int64) - 1) // 2
    idx_q = (np.abs(POINTS.imag).astype(np.int64) - 1) // 2
    with np.errstate(divide="ignore"):
        logp = np.log(pmf[idx_i]) + np.log(pmf[idx_q]) - np.log(4.0)
    return logp
