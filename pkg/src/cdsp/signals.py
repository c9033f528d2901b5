"""Symbol frames, dual-polarization waveforms, 16QAM mapping and pulse shaping.

Conventions used throughout the package:

* 16QAM symbols are Gray-mapped per rail, two bits per rail, levels
  ``00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3`` scaled by ``1/sqrt(10)`` so the
  constellation has unit average power.  The first two bits of a nibble drive
  the I rail, the last two the Q rail (``0000 -> (-3-3j)/sqrt(10)``).
* Waveforms keep symbol centers on the sample grid: symbol ``k`` sits at
  sample index ``k * sps``.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as _sig

from .errors import (AliasingError, ConfigError, InsufficientDataError,
                     ShapeError, SyncError)

# Gray levels indexed by the two rail bits read as (msb, lsb).
_LEVELS_BY_BITS = np.array([-3.0, -1.0, 3.0, 1.0]) / np.sqrt(10.0)
# Bit pairs for levels sorted ascending (-3, -1, +1, +3).
_BITS_BY_SORTED_LEVEL = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)
_DECISION_EDGES = np.array([-2.0, 0.0, 2.0]) / np.sqrt(10.0)

#: The 16 constellation points in bit order of the nibble value.
CONSTELLATION_16QAM = np.array(
    [_LEVELS_BY_BITS[n >> 2] + 1j * _LEVELS_BY_BITS[n & 3] for n in range(16)]
)

#: Ring radii of the unit-power 16QAM constellation (used by radius-directed EQ).
RING_RADII_16QAM = np.sqrt(np.array([0.2, 1.0, 1.8]))


def map_16qam(bits):
    """Map a bit array (length divisible by 4) to 16QAM symbols."""
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size % 4:
        raise ShapeError(f"bit array length {bits.size} is not a multiple of 4")
    nib = bits.reshape(-1, 4).astype(np.int64)
    i_lvl = _LEVELS_BY_BITS[2 * nib[:, 0] + nib[:, 1]]
    q_lvl = _LEVELS_BY_BITS[2 * nib[:, 2] + nib[:, 3]]
    return i_lvl + 1j * q_lvl


def slice_16qam(symbols):
    """Nearest-point decision onto the unit-power 16QAM grid."""
    symbols = np.asarray(symbols)
    i_idx = np.digitize(symbols.real, _DECISION_EDGES)
    q_idx = np.digitize(symbols.imag, _DECISION_EDGES)
    levels = np.sort(_LEVELS_BY_BITS)
    return levels[i_idx] + 1j * levels[q_idx]


def demap_16qam(symbols):
    """Hard-decide 16QAM symbols back to bits (inverse of :func:`map_16qam`)."""
    symbols = np.asarray(symbols)
    i_idx = np.digitize(symbols.real, _DECISION_EDGES)
    q_idx = np.digitize(symbols.imag, _DECISION_EDGES)
    out = np.empty((symbols.size, 4), dtype=np.uint8)
    out[:, 0:2] = _BITS_BY_SORTED_LEVEL[i_idx]
    out[:, 2:4] = _BITS_BY_SORTED_LEVEL[q_idx]
    return out.reshape(-1)


@dataclass
class SymbolFrame:
    """One polarization pair of symbol sequences with their source bits."""

    symbols_x: np.ndarray
    symbols_y: np.ndarray
    bits_x: np.ndarray
    bits_y: np.ndarray

    def __post_init__(self):
        if len(self.symbols_x) != len(self.symbols_y):
            raise ShapeError("polarizations differ in length")
        for bits, sym in ((self.bits_x, self.symbols_x), (self.bits_y, self.symbols_y)):
            if len(bits) != 4 * len(sym):
                raise ShapeError("bit count does not match 4 bits per symbol")

    def __len__(self):
        return len(self.symbols_x)


def random_frame(n_symbols, seed):
    """Generate a frame of uniform random 16QAM symbols on both polarizations."""
    if n_symbols <= 0:
        raise ConfigError("n_symbols must be positive")
    rng = np.random.default_rng(seed)
    bits_x = rng.integers(0, 2, 4 * n_symbols, dtype=np.uint8)
    bits_y = rng.integers(0, 2, 4 * n_symbols, dtype=np.uint8)
    return SymbolFrame(map_16qam(bits_x), map_16qam(bits_y), bits_x, bits_y)


def frame_from_symbols(symbols_x, symbols_y):
    """Wrap raw symbol arrays in a frame, filling bits from hard decisions."""
    return SymbolFrame(
        np.asarray(symbols_x),
        np.asarray(symbols_y),
        demap_16qam(symbols_x),
        demap_16qam(symbols_y),
    )


@dataclass
class DualPolWaveform:
    """Complex baseband waveform on two polarizations at a common rate."""

    x: np.ndarray
    y: np.ndarray
    sample_rate: float
    symbol_rate: float

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ShapeError("polarizations differ in length")
        if self.sample_rate <= 0 or self.symbol_rate <= 0:
            raise ConfigError("rates must be positive")

    @property
    def sps(self):
        return self.sample_rate / self.symbol_rate

    def __len__(self):
        return len(self.x)

    def copy(self):
        return DualPolWaveform(self.x.copy(), self.y.copy(),
                               self.sample_rate, self.symbol_rate)

    def power(self):
        """Mean power averaged over both polarizations."""
        return 0.5 * (np.mean(np.abs(self.x) ** 2) + np.mean(np.abs(self.y) ** 2))


def raised_cosine_taps(rolloff, sps, span=16, window_beta=2.0):
    """Raised-cosine impulse response truncated to +-span symbols.

    The taps are sampled so that ``taps[span * sps] == 1`` and all other
    symbol-spaced taps are exactly zero (zero ISI at symbol centers, preserved
    under the mild Kaiser taper applied to the truncated tails).
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ConfigError(f"rolloff {rolloff} outside [0, 1]")
    t = np.arange(-span * sps, span * sps + 1) / sps
    h = np.empty_like(t)
    if rolloff == 0.0:
        h = np.sinc(t)
    else:
        # Points where the closed form is 0/0.
        singular = np.isclose(np.abs(t), 1.0 / (2.0 * rolloff))
        tt = np.where(singular, 0.0, t)
        h = np.sinc(tt) * np.cos(np.pi * rolloff * tt) / (1.0 - (2.0 * rolloff * tt) ** 2)
        h[singular] = np.pi / 4.0 * np.sinc(1.0 / (2.0 * rolloff))
    h *= np.kaiser(len(h), window_beta)
    return h


def pulse_shape(frame, rolloff, sps, symbol_rate=36e9, span=16):
    """Shape a symbol frame into a dual-pol waveform at integer ``sps``.

    Group delay is compensated so symbol ``k`` lands on sample ``k * sps``.
    """
    if int(sps) != sps or sps < 2:
        raise ConfigError(f"pulse shaping needs integer sps >= 2, got {sps}")
    sps = int(sps)
    taps = raised_cosine_taps(rolloff, sps, span)
    delay = span * sps
    n = len(frame)

    def _shape(symbols):
        up = np.zeros(n * sps, dtype=complex)
        up[::sps] = symbols
        full = np.convolve(up, taps)
        return full[delay:delay + n * sps]

    return DualPolWaveform(_shape(frame.symbols_x), _shape(frame.symbols_y),
                           float(symbol_rate) * sps, float(symbol_rate))


def resample(waveform, new_sps, max_denominator=4096):
    """Rational band-limited resampling to ``new_sps`` samples per symbol.

    Raises :class:`AliasingError` when the target rate cannot carry the full
    symbol band (``new_sps < 2`` folds any excess-bandwidth signal).
    """
    if new_sps < 2.0:
        raise AliasingError(f"{new_sps} samples/symbol would alias the signal band")
    ratio = (Fraction(new_sps).limit_denominator(max_denominator)
             / Fraction(waveform.sps).limit_denominator(max_denominator))
    up, down = ratio.numerator, ratio.denominator
    if up == down:
        return waveform.copy()
    # Anti-alias/anti-image filter on the upsampled grid; odd length so the
    # group delay is an integer number of samples and symbol centers survive.
    cutoff = min(1.0 / up, 1.0 / down)
    ntaps = 32 * max(up, down) + 1
    taps = _sig.firwin(ntaps, cutoff, window=("kaiser", 9.0))
    x = _sig.resample_poly(waveform.x, up, down, window=taps)
    y = _sig.resample_poly(waveform.y, up, down, window=taps)
    return DualPolWaveform(x, y, waveform.sample_rate * up / down, waveform.symbol_rate)


Q_FACTOR_CAP_DB = 20.0
SYNC_PEAK_THRESHOLD = 0.2
MIN_COMPARED_SYMBOLS = 10_000


@dataclass(frozen=True)
class QualityMetrics:
    """Bit-error-based quality summary of a decided stream."""

    ber: float
    q_factor_db: float
    evm_percent: float
    n_bits: int
    n_bit_errors: int
    pol_swapped: bool
    rotations: tuple
    lags: tuple


def q_from_ber(ber):
    """Gaussian-noise Q-factor in dB; errorless blocks cap at 20 dB."""
    if ber <= 0.0:
        return Q_FACTOR_CAP_DB
    from scipy.special import erfcinv
    return min(Q_FACTOR_CAP_DB, float(20.0 * np.log10(np.sqrt(2.0) * erfcinv(2.0 * ber))))


def _align_streams(dec, ref, max_lag):
    """Best (lag, quarter-turn rotation, peak) matching dec[n] ~ ref[n-lag]."""
    corr = _sig.fftconvolve(dec, np.conj(ref)[::-1])
    lags = np.arange(corr.size) - (len(ref) - 1)
    keep = np.abs(lags) <= max_lag
    corr, lags = corr[keep], lags[keep]
    k = int(np.argmax(np.abs(corr)))
    scale = np.sqrt(float(np.sum(np.abs(dec) ** 2)) * float(np.sum(np.abs(ref) ** 2)))
    peak = float(np.abs(corr[k])) / scale if scale > 0 else 0.0
    rot = int(np.round(np.angle(corr[k]) / (np.pi / 2.0))) % 4
    return int(lags[k]), rot, peak


def _compare_one(dec, ref, lag, rot, skip):
    dec = dec * np.exp(-1j * rot * np.pi / 2.0)
    n0 = skip + max(0, lag)
    n1 = min(len(dec), len(ref) + lag)
    d, r = dec[n0:n1], ref[n0 - lag:n1 - lag]
    errs = int(np.sum(demap_16qam(d) != demap_16qam(r)))
    ev = float(np.sum(np.abs(d - r) ** 2)), float(np.sum(np.abs(r) ** 2))
    return errs, 4 * len(d), ev


def measure_quality(decided, reference, skip, max_lag=512):
    """BER, Q-factor and EVM of a decided frame against its reference.

    Polarization swap and per-polarization quarter-turn rotations and lags
    (up to ``max_lag`` symbols) are resolved blindly by cross-correlation;
    a correlation peak below 0.2 on either polarization raises SyncError
    rather than reporting a meaningless BER near 0.5.  ``skip`` symbols are
    dropped from the front of both frames before counting.
    """
    hyps = []
    for swapped in (False, True):
        refs = (reference.symbols_y, reference.symbols_x) if swapped else \
            (reference.symbols_x, reference.symbols_y)
        al = [_align_streams(dec, r, max_lag)
              for dec, r in zip((decided.symbols_x, decided.symbols_y), refs)]
        hyps.append((al[0][2] + al[1][2], swapped, refs, al))
    score, swapped, refs, al = max(hyps, key=lambda h: h[0])
    worst = min(a[2] for a in al)
    if worst < SYNC_PEAK_THRESHOLD:
        raise SyncError(
            f"alignment correlation peak {worst:.3f} below {SYNC_PEAK_THRESHOLD}"
            f" (swap={swapped}, lags={[a[0] for a in al]})"
        )
    n_err = n_bits = 0
    ev_num = ev_den = 0.0
    for dec, r, (lag, rot, _) in zip(
            (decided.symbols_x, decided.symbols_y), refs, al):
        errs, bits, (num, den) = _compare_one(dec, r, lag, rot, skip)
        n_err += errs
        n_bits += bits
        ev_num += num
        ev_den += den
    if n_bits < 4 * MIN_COMPARED_SYMBOLS:
        raise InsufficientDataError(
            f"only {n_bits // 4} symbols compared, need {MIN_COMPARED_SYMBOLS}"
        )
    ber = n_err / n_bits
    evm = 100.0 * np.sqrt(ev_num / ev_den) if ev_den > 0 else float("nan")
    return QualityMetrics(ber, q_from_ber(ber), evm, n_bits, n_err, swapped,
                          tuple(a[1] for a in al), tuple(a[0] for a in al))
