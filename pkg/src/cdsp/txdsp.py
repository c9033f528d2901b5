"""Transmit-side DSP: IQ impairment injection and chirp-based CD pre-compensation.

Rail-delay convention: a positive skew ``tau`` delays the I rail by ``+tau/2``
and the Q rail by ``-tau/2`` (transfer matrix ``diag(exp(-jw*tau/2),
exp(+jw*tau/2))`` on the rails), so the I-minus-Q differential delay equals
``tau``.  Amplitude/phase imbalance mixes the rails as

    [I']   [1   (1+g)*sin(theta)] [I]
    [Q'] = [0   (1-g)*cos(theta)] [Q]

applied after the skew split.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DelayRangeError
from .signals import DualPolWaveform

_C_LIGHT = 299792458.0


def beta2_from_d(d_ps_nm_km, wavelength_nm):
    """Group-velocity dispersion (s^2/m) from a D coefficient in ps/(nm km)."""
    d_si = d_ps_nm_km * 1e-6  # s/m^2
    lam = wavelength_nm * 1e-9
    return -d_si * lam * lam / (2.0 * np.pi * _C_LIGHT)


def delay_rails(arr, tau_i, tau_q, sample_rate):
    """Delay the real and imaginary rails of a complex array independently.

    Exact linear-phase delays applied in the frequency domain; the record is
    treated as circular.
    """
    n = len(arr)
    w = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / sample_rate)
    out_i = arr.real
    out_q = arr.imag
    if tau_i != 0.0:
        out_i = np.fft.ifft(np.fft.fft(arr.real) * np.exp(-1j * w * tau_i)).real
    if tau_q != 0.0:
        out_q = np.fft.ifft(np.fft.fft(arr.imag) * np.exp(-1j * w * tau_q)).real
    return out_i + 1j * out_q


@dataclass
class ImbalanceSpec:
    """Transmitter and receiver IQ impairments for both polarizations.

    Skews are in seconds, amplitude imbalance ``g`` is dimensionless and
    phase imbalance is in degrees.
    """

    tx_skew_x: float = 0.0
    tx_skew_y: float = 0.0
    tx_amp_x: float = 0.0
    tx_amp_y: float = 0.0
    tx_phase_x: float = 0.0
    tx_phase_y: float = 0.0
    rx_skew_x: float = 0.0
    rx_skew_y: float = 0.0
    rx_amp_x: float = 0.0
    rx_amp_y: float = 0.0
    rx_phase_x: float = 0.0
    rx_phase_y: float = 0.0

    def __post_init__(self):
        for name in ("tx_amp_x", "tx_amp_y", "rx_amp_x", "rx_amp_y"):
            if abs(getattr(self, name)) >= 1.0:
                raise ConfigError(f"{name} must satisfy |g| < 1")
        for name in ("tx_phase_x", "tx_phase_y", "rx_phase_x", "rx_phase_y"):
            if abs(getattr(self, name)) > 90.0:
                raise ConfigError(f"{name} must satisfy |theta| <= 90 deg")

    @classmethod
    def zero(cls):
        return cls()

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)


def _check_delay(tau, symbol_rate):
    if abs(tau) > 0.5 / symbol_rate:
        raise DelayRangeError(
            f"rail delay {tau * 1e12:.2f} ps exceeds half a symbol period")


def _mix_rails(arr, g, theta_deg):
    th = np.deg2rad(theta_deg)
    i_out = arr.real + (1.0 + g) * np.sin(th) * arr.imag
    q_out = (1.0 - g) * np.cos(th) * arr.imag
    return i_out + 1j * q_out


def _unmix_rails(arr, g, theta_deg):
    th = np.deg2rad(theta_deg)
    a = (1.0 + g) * np.sin(th)
    b = (1.0 - g) * np.cos(th)
    if abs(b) < 1e-12:
        raise ConfigError("imbalance matrix is singular, cannot invert")
    q_in = arr.imag / b
    i_in = arr.real - a * q_in
    return i_in + 1j * q_in


def inject_tx_imbalance(waveform, spec):
    """Apply transmitter skew then amplitude/phase mixing to both pols."""
    _check_delay(spec.tx_skew_x, waveform.symbol_rate)
    _check_delay(spec.tx_skew_y, waveform.symbol_rate)
    fs = waveform.sample_rate
    x = delay_rails(waveform.x, +spec.tx_skew_x / 2.0, -spec.tx_skew_x / 2.0, fs)
    y = delay_rails(waveform.y, +spec.tx_skew_y / 2.0, -spec.tx_skew_y / 2.0, fs)
    x = _mix_rails(x, spec.tx_amp_x, spec.tx_phase_x)
    y = _mix_rails(y, spec.tx_amp_y, spec.tx_phase_y)
    return DualPolWaveform(x, y, fs, waveform.symbol_rate)


def invert_tx_imbalance(waveform, spec):
    """Exact algebraic inverse of :func:`inject_tx_imbalance`."""
    fs = waveform.sample_rate
    x = _unmix_rails(waveform.x, spec.tx_amp_x, spec.tx_phase_x)
    y = _unmix_rails(waveform.y, spec.tx_amp_y, spec.tx_phase_y)
    x = delay_rails(x, -spec.tx_skew_x / 2.0, +spec.tx_skew_x / 2.0, fs)
    y = delay_rails(y, -spec.tx_skew_y / 2.0, +spec.tx_skew_y / 2.0, fs)
    return DualPolWaveform(x, y, fs, waveform.symbol_rate)


def apply_scan_delay(waveform, tau_x, tau_y):
    """Impose a trial differential IQ delay per polarization.

    Same rail-delay mechanism (and sign convention) as the skew part of
    :func:`inject_tx_imbalance`; used both for scanning and for rough TX-skew
    compensation (with a negated delay).
    """
    _check_delay(tau_x, waveform.symbol_rate)
    _check_delay(tau_y, waveform.symbol_rate)
    fs = waveform.sample_rate
    x = delay_rails(waveform.x, +tau_x / 2.0, -tau_x / 2.0, fs)
    y = delay_rails(waveform.y, +tau_y / 2.0, -tau_y / 2.0, fs)
    return DualPolWaveform(x, y, fs, waveform.symbol_rate)


@dataclass
class ChirpFilterSpec:
    """Parameters of the single-FFT chirp filter used for CD pre-compensation.

    ``block_size`` fixes the exact dispersion the filter can represent:
    the chirp base is ``W = exp(-j*sign(beta2*L)*pi/N)``, equivalent to
    ``exp(j*Ts^2/(2*beta2*L_eff))`` with ``beta2*L_eff = N*Ts^2/(2*pi)``.
    ``block_size`` should therefore be close to ``2*pi*beta2*L/Ts^2``.
    """

    block_size: int
    beta2: float
    length_m: float
    ts: float

    def __post_init__(self):
        if self.block_size <= 0 or self.block_size % 2:
            raise ConfigError(f"block size {self.block_size} must be even and positive")
        if self.ts <= 0:
            raise ConfigError("sample period must be positive")

    @classmethod
    def from_fiber(cls, d_ps_nm_km, wavelength_nm, length_km, sample_rate,
                   block_size=None):
        """Build a spec from fiber parameters; derive the block size if omitted."""
        beta2 = beta2_from_d(d_ps_nm_km, wavelength_nm)
        ts = 1.0 / sample_rate
        if block_size is None:
            n_star = 2.0 * np.pi * abs(beta2) * length_km * 1e3 / (ts * ts)
            block_size = max(2, int(round(n_star / 2.0)) * 2)
        return cls(int(block_size), beta2, length_km * 1e3, ts)

    @property
    def W(self):
        """Unit-magnitude chirp base actually used by the filter."""
        s = np.sign(self.beta2 * self.length_m) or 1.0
        return np.exp(-1j * s * np.pi / self.block_size)

    def dispersion_memory_samples(self, symbol_rate, rolloff=0.5):
        """Two-sided CD memory in samples for the occupied signal band."""
        bw = (1.0 + rolloff) * symbol_rate
        return abs(self.beta2) * self.length_m * 2.0 * np.pi * bw / self.ts


def _chirp_block(block, sign):
    """One block of the chirp filter: diag-chirp, single FFT, diag-chirp."""
    n = len(block)
    m = np.arange(n)
    phase = np.pi * ((m * m) % (2 * n)) / n
    if sign > 0:
        c = np.exp(-1j * phase)
        return np.sqrt(n) * np.exp(1j * np.pi / 4.0) * c * np.fft.ifft(block * c)
    c = np.exp(1j * phase)
    return np.exp(-1j * np.pi / 4.0) / np.sqrt(n) * c * np.fft.fft(block * c)


def prechirp_cd_compensate(waveform, spec, band_limit=0.75):
    """Pre-compensate chromatic dispersion with the single-FFT chirp filter.

    Blocks overlap by 50% and only the middle half of each block output is
    kept; the record is treated as circular so edges stay clean.  Block
    processing scatters a little energy outside the occupied band; the
    output is limited to ``|f| <= band_limit * symbol_rate`` (the band edge
    for the rolloff-0.5 pulse) the way any DAC/driver chain would.
    """
    if spec.length_m == 0.0 or spec.beta2 == 0.0:
        return waveform.copy()
    n = len(waveform)
    big_n = spec.block_size
    memory = spec.dispersion_memory_samples(waveform.symbol_rate)
    if big_n < memory:
        raise ConfigError(
            f"block size {big_n} below dispersion memory {memory:.0f} samples")
    if n < big_n:
        raise ConfigError(f"record ({n}) shorter than one chirp block ({big_n})")
    if abs(spec.ts * waveform.sample_rate - 1.0) > 1e-9:
        raise ConfigError("chirp filter sample period does not match waveform")
    sign = 1.0 if spec.beta2 * spec.length_m > 0 else -1.0
    hop = big_n // 2
    offsets = np.arange(big_n) - big_n // 4
    freqs = np.fft.fftfreq(n, d=spec.ts)
    keep_band = np.abs(freqs) <= band_limit * waveform.symbol_rate

    def _filter(arr):
        out = np.empty(n, dtype=complex)
        for start in range(0, n, hop):
            idx = (start + offsets) % n
            yb = _chirp_block(arr[idx], sign)
            keep = yb[big_n // 4: big_n // 4 + hop]
            stop = min(start + hop, n)
            out[start:stop] = keep[: stop - start]
        if band_limit is not None:
            out = np.fft.ifft(np.fft.fft(out) * keep_band)
        return out

    return DualPolWaveform(_filter(waveform.x), _filter(waveform.y),
                           waveform.sample_rate, waveform.symbol_rate)
