"""Amplitude shaping: enumerative sphere shaping, MB baseline, PAS mapping.

The sphere shaper indexes, lexicographically, all length-N amplitude
sequences whose energy stays within a bound E_max. Counts are exact
arbitrary-precision integers. Because every odd amplitude satisfies
a^2 = 8*w + 1 with integer weight w = (a^2 - 1)/8, a length-m sequence has
energy m + 8*j for integer j, and the whole trellis lives on that grid:
T[m][j] counts length-m sequences with energy <= m + 8*j.
"""

import os
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signals import DualPolSymbolFrame

TRELLIS_CACHE_VERSION = 1


@dataclass(frozen=True)
class AmplitudeAlphabet:
    levels: tuple

    def __post_init__(self):
        lv = tuple(int(a) for a in self.levels)
        if len(lv) < 2:
            raise ValueError("alphabet needs at least 2 levels")
        if any(a <= 0 or a % 2 == 0 for a in lv):
            raise ValueError("levels must be positive odd integers")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "levels", lv)

    @property
    def M(self):
        return len(self.levels)

    @property
    def weights(self):
        return tuple((a * a - 1) // 8 for a in self.levels)

    def index_of(self, amp):
        try:
            return self.levels.index(int(amp))
        except ValueError:
            raise ValueError(f"amplitude {amp} not in alphabet") from None


def default_alphabet(m=8):
    return AmplitudeAlphabet(tuple(range(1, 2 * m, 2)))


@dataclass
class EssTrellis:
    alphabet: AmplitudeAlphabet
    N: int
    E_max: int
    counts: list  # counts[m][j], m = 0..N, j = 0..J_max

    @property
    def J_max(self):
        return (self.E_max - self.N) // 8

    @property
    def n_sequences(self):
        return self.counts[self.N][self.J_max]

    def max_bits(self):
        return self.n_sequences.bit_length() - 1


def _count_rows(alphabet, N, J_max):
    weights = alphabet.weights
    rows = [[1] * (J_max + 1)]
    for _ in range(1, N + 1):
        prev = rows[-1]
        row = [0] * (J_max + 1)
        for w in weights:
            for j in range(w, J_max + 1):
                row[j] += prev[j - w]
        rows.append(row)
    return rows


def build_trellis(alphabet: AmplitudeAlphabet, N, E_max) -> EssTrellis:
    """Exact sequence-count table for the energy sphere of radius E_max."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if E_max < N * alphabet.levels[0] ** 2:
        raise ValueError(
            f"E_max={E_max} below minimum feasible energy "
            f"{N * alphabet.levels[0] ** 2}: empty sphere"
        )
    J_max = (E_max - N) // 8
    return EssTrellis(alphabet, N, N + 8 * J_max, _count_rows(alphabet, N, J_max))


def min_emax(alphabet: AmplitudeAlphabet, N, k) -> int:
    """Smallest on-grid E_max whose sphere holds at least 2^k sequences."""
    if 2 ** k > alphabet.M ** N:
        raise ValueError(f"k={k} infeasible: alphabet supports at most "
                         f"{N} * log2({alphabet.M}) bits")
    target = 1 << k
    weights = alphabet.weights
    # Rolling two-row DP; grow the energy grid geometrically until the
    # final row reaches the target count.
    J_hi = max(16, int(1.2 * k))
    J_full = N * weights[-1]
    while True:
        J_hi = min(J_hi, J_full)
        row = [1] * (J_hi + 1)
        for _ in range(1, N + 1):
            new = [0] * (J_hi + 1)
            for w in weights:
                for j in range(w, J_hi + 1):
                    new[j] += row[j - w]
            row = new
        if row[J_hi] >= target or J_hi == J_full:
            break
        J_hi = min(2 * J_hi, J_full)
    for j, c in enumerate(row):
        if c >= target:
            return N + 8 * j
    raise ValueError(f"k={k} infeasible for N={N}")


def bits_to_index(bits) -> int:
    bits = np.asarray(bits, dtype=np.uint8)
    k = bits.size
    pad = (-k) % 8
    return int.from_bytes(np.packbits(bits).tobytes(), "big") >> pad


def index_to_bits(index: int, k: int) -> np.ndarray:
    pad = (-k) % 8
    raw = (index << pad).to_bytes((k + pad) // 8, "big")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:k].copy()


def ess_encode(bits, trellis: EssTrellis) -> np.ndarray:
    """Map k input bits to the amplitude sequence at that sphere index."""
    index = bits_to_index(bits)
    if index >= trellis.n_sequences:
        raise ValueError(f"index {index} outside the sphere of "
                         f"{trellis.n_sequences} sequences")
    levels = trellis.alphabet.levels
    weights = trellis.alphabet.weights
    counts = trellis.counts
    J_max = trellis.J_max
    out = np.empty(trellis.N, dtype=np.int64)
    W = 0
    for i in range(trellis.N):
        m = trellis.N - 1 - i
        row = counts[m]
        for a, w in zip(levels, weights):
            j = J_max - W - w
            c = row[j] if j >= 0 else 0
            if index < c:
                out[i] = a
                W += w
                break
            index -= c
        else:
            raise AssertionError("index exceeded sphere size")
    return out


def ess_decode(seq, trellis: EssTrellis, k: int) -> np.ndarray:
    """Inverse of ess_encode: sphere index of a sequence, as k bits."""
    seq = np.asarray(seq)
    if seq.size != trellis.N:
        raise ValueError(f"sequence length {seq.size} != N={trellis.N}")
    levels = trellis.alphabet.levels
    weights = trellis.alphabet.weights
    counts = trellis.counts
    J_max = trellis.J_max
    index = 0
    W = 0
    for i in range(trellis.N):
        m = trellis.N - 1 - i
        row = counts[m]
        ai = trellis.alphabet.index_of(seq[i])
        for a, w in zip(levels[:ai], weights[:ai]):
            j = J_max - W - w
            if j >= 0:
                index += row[j]
        W += weights[ai]
        if J_max - W < 0:
            raise ValueError("sequence energy exceeds the sphere bound")
    if index >= (1 << k):
        raise ValueError("sequence lies outside the 2^k codebook")
    return index_to_bits(index, k)


def codebook_mean_energy(trellis: EssTrellis, k: int) -> float:
    """Exact mean per-amplitude energy over the 2^k lowest-index sequences.

    Uses an energy-sum table U[m][j] (total energy of all counted suffixes)
    and, when the codebook is a strict subset of the sphere, a subtree
    decomposition along the first excluded sequence.
    """
    if (1 << k) > trellis.n_sequences:
        raise ValueError("codebook larger than the sphere")
    alphabet = trellis.alphabet
    weights = alphabet.weights
    squares = [a * a for a in alphabet.levels]
    J_max = trellis.J_max
    counts = trellis.counts

    u_prev = [0] * (J_max + 1)
    u_rows = [u_prev]
    for m in range(1, trellis.N + 1):
        t_prev = counts[m - 1]
        u_row = [0] * (J_max + 1)
        for w, sq in zip(weights, squares):
            for j in range(w, J_max + 1):
                u_row[j] += sq * t_prev[j - w] + u_prev[j - w]
        u_rows.append(u_row)
        u_prev = u_row

    total_count = 1 << k
    if total_count == trellis.n_sequences:
        total_energy = u_rows[trellis.N][J_max]
    else:
        boundary = ess_encode(index_to_bits(total_count, k + 1), trellis)
        total_energy = 0
        check = 0
        W = 0
        prefix_energy = 0
        for i in range(trellis.N):
            m = trellis.N - 1 - i
            ai = alphabet.index_of(boundary[i])
            for a, w, sq in zip(alphabet.levels[:ai], weights[:ai], squares[:ai]):
                j = J_max - W - w
                if j >= 0:
                    c = counts[m][j]
                    total_energy += (prefix_energy + sq) * c + u_rows[m][j]
                    check += c
            W += weights[ai]
            prefix_energy += squares[ai]
        if check != total_count:
            raise AssertionError("subtree decomposition lost sequences")
    return total_energy / (total_count * trellis.N)


# ---------------------------------------------------------------------------
# Maxwell-Boltzmann baseline


@dataclass(frozen=True)
class MbPrior:
    lam: float
    pmf: np.ndarray

    def entropy_bits(self):
        p = self.pmf[self.pmf > 0]
        return float(-np.sum(p * np.log2(p)))

    def mean_energy(self, alphabet: AmplitudeAlphabet):
        sq = np.asarray(alphabet.levels, dtype=np.float64) ** 2
        return float(np.dot(self.pmf, sq))


def _mb_pmf(alphabet, lam):
    sq = np.asarray(alphabet.levels, dtype=np.float64) ** 2
    w = np.exp(-lam * (sq - sq[0]))  # shift for numerical range
    return w / w.sum()


def _entropy_bits(pmf):
    p = pmf[pmf > 0]
    return float(-np.sum(p * np.log2(p)))


def mb_fit(alphabet: AmplitudeAlphabet, target_entropy: float) -> MbPrior:
    """MB prior whose entropy matches the target (bisection on lambda)."""
    max_h = np.log2(alphabet.M)
    if target_entropy <= 0:
        raise ValueError("target entropy must be positive")
    if target_entropy > max_h + 1e-12:
        raise ValueError(f"target entropy {target_entropy} exceeds log2(M)={max_h}")
    if abs(target_entropy - max_h) < 1e-12:
        return MbPrior(0.0, _mb_pmf(alphabet, 0.0))
    lo, hi = 0.0, 1.0
    while _entropy_bits(_mb_pmf(alphabet, hi)) > target_entropy:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("entropy bisection failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _entropy_bits(_mb_pmf(alphabet, mid)) > target_entropy:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return MbPrior(lam, _mb_pmf(alphabet, lam))


def mb_fit_mean_energy(alphabet: AmplitudeAlphabet, target_energy: float) -> MbPrior:
    """MB prior whose mean squared amplitude matches the target."""
    sq = np.asarray(alphabet.levels, dtype=np.float64) ** 2
    if not (sq[0] < target_energy <= sq.mean() + 1e-12):
        if abs(target_energy - sq.mean()) < 1e-9:
            return MbPrior(0.0, _mb_pmf(alphabet, 0.0))
        if target_energy <= sq[0]:
            raise ValueError("target energy at or below the minimum level")
    mean_e = lambda lam: float(np.dot(_mb_pmf(alphabet, lam), sq))
    lo, hi = 0.0, 1.0
    while mean_e(hi) > target_energy:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("energy bisection failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_e(mid) > target_energy:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return MbPrior(lam, _mb_pmf(alphabet, lam))


def mb_sample(prior: MbPrior, alphabet: AmplitudeAlphabet, n, rng) -> np.ndarray:
    idx = rng.choice(alphabet.M, size=n, p=prior.pmf)
    return np.asarray(alphabet.levels, dtype=np.int64)[idx]


# ---------------------------------------------------------------------------
# PAS mapping and interleaving


def pas_map(amps, sign_bits, amp_pmf=None, hx_bits=None) -> DualPolSymbolFrame:
    """Combine shaped amplitudes with uniform sign bits into QAM symbols.

    Amplitudes are consumed four per symbol in the order X-I, X-Q, Y-I, Y-Q;
    sign bit 0 selects +, 1 selects -. Attaches the per-dimension labels
    (sign bit then Gray-coded amplitude bits).
    """
    amps = np.asarray(amps, dtype=np.int64)
    sign_bits = np.asarray(sign_bits, dtype=np.uint8)
    if amps.size % 4 != 0:
        raise ValueError("amplitude count must be a multiple of 4")
    if sign_bits.size != amps.size:
        raise ValueError("need one sign bit per amplitude")

    signs = 1.0 - 2.0 * sign_bits.astype(np.float64)
    dims = signs * amps  # signed levels, 4 per symbol
    xi, xq, yi, yq = dims[0::4], dims[1::4], dims[2::4], dims[3::4]

    amp_idx = (amps - 1) // 2
    gray = amp_idx ^ (amp_idx >> 1)
    dim_labels = np.empty((amps.size, 4), dtype=np.uint8)
    dim_labels[:, 0] = sign_bits
    dim_labels[:, 1] = (gray >> 2) & 1
    dim_labels[:, 2] = (gray >> 1) & 1
    dim_labels[:, 3] = gray & 1

    n_sym = amps.size // 4
    bits_x = np.empty((n_sym, 8), dtype=np.uint8)
    bits_y = np.empty((n_sym, 8), dtype=np.uint8)
    bits_x[:, :4] = dim_labels[0::4]
    bits_x[:, 4:] = dim_labels[1::4]
    bits_y[:, :4] = dim_labels[2::4]
    bits_y[:, 4:] = dim_labels[3::4]

    return DualPolSymbolFrame(
        x=xi + 1j * xq,
        y=yi + 1j * yq,
        bits_x=bits_x,
        bits_y=bits_y,
        amp_pmf=None if amp_pmf is None else np.asarray(amp_pmf, dtype=np.float64),
        hx_bits=hx_bits,
    )


def interleave(blocks, span, rng) -> np.ndarray:
    """Permute the concatenated amplitudes of adjacent blocks uniformly."""
    flat = np.concatenate([np.asarray(b) for b in blocks])
    if flat.size != span:
        raise ValueError(f"total amplitudes {flat.size} != span {span}")
    return flat[rng.permutation(span)]


# ---------------------------------------------------------------------------
# Trellis cache

def trellis_cache_path(cache_dir, alphabet: AmplitudeAlphabet, N, E_max) -> Path:
    tag = "-".join(str(a) for a in alphabet.levels)
    return Path(cache_dir) / f"ess_trellis_v{TRELLIS_CACHE_VERSION}_A{tag}_N{N}_E{E_max}.pkl"


def save_trellis(trellis: EssTrellis, path):
    payload = {
        "version": TRELLIS_CACHE_VERSION,
        "levels": trellis.alphabet.levels,
        "N": trellis.N,
        "E_max": trellis.E_max,
        "counts": trellis.counts,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # write-then-rename so concurrent writers never expose a partial file
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    with open(tmp, "wb") as f:
        pickle.dump(payload, f, protocol=pickle.HIGHEST_PROTOCOL)
    os.replace(tmp, path)


def load_trellis(path) -> EssTrellis:
    with open(path, "rb") as f:
        payload = pickle.load(f)
    if payload.get("version") != TRELLIS_CACHE_VERSION:
        raise ValueError(f"trellis cache version {payload.get('version')} "
                         f"unsupported (expected {TRELLIS_CACHE_VERSION})")
    return EssTrellis(
        AmplitudeAlphabet(payload["levels"]),
        payload["N"],
        payload["E_max"],
        payload["counts"],
    )


def cached_trellis(alphabet: AmplitudeAlphabet, N, E_max, cache_dir=None) -> EssTrellis:
    """Build a trellis, reusing a cache file keyed by (alphabet, N, E_max)."""
    if cache_dir is None:
        return build_trellis(alphabet, N, E_max)
    path = trellis_cache_path(cache_dir, alphabet, N, E_max)
    if path.exists():
        trellis = load_trellis(path)
        if (trellis.alphabet == alphabet and trellis.N == N
                and trellis.E_max == N + 8 * ((E_max - N) // 8)):
            return trellis
    trellis = build_trellis(alphabet, N, E_max)
    save_trellis(trellis, path)
    return trellis
