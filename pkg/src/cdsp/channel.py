"""Fiber and front-end emulation: CD, PMD, ASE loading, LO offset, RX imbalance.

All operations are deterministic given the spec seed.  Random draws use
independent child streams of one seed sequence so that, e.g., changing the
OSNR does not change the PMD realization.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateSignalError
from .signals import DualPolWaveform
from .txdsp import ImbalanceSpec, _check_delay, _mix_rails, _unmix_rails, beta2_from_d, delay_rails

OSNR_REF_BANDWIDTH = 12.5e9


@dataclass
class ChannelSpec:
    """Channel and local-oscillator parameters.

    ``dgd_mean_ps_sqrt_km`` selects the sectioned statistical PMD model;
    set it to ``None`` and give ``dgd_ps`` for a single first-order element.
    """

    d_coeff: float = -16.0            # ps/(nm km)
    length_km: float = 100.0
    dgd_ps: float = 0.0               # first-order DGD
    sop_deg: float = 45.0             # first-order launch angle
    dgd_mean_ps_sqrt_km: Optional[float] = 0.5
    pmd_sections: int = 20
    osnr_db: float = 23.0
    freq_offset_hz: float = 1e9
    linewidth_hz: float = 1e5         # per laser; TX and LO contribute alike
    wavelength_nm: float = 1552.5
    seed: int = 0

    def __post_init__(self):
        if self.length_km < 0:
            raise ConfigError("length_km must be nonnegative")
        if self.pmd_sections <= 0:
            raise ConfigError("pmd_sections must be positive")


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def apply_cd(waveform, d_coeff, length_km, wavelength_nm=1552.5):
    """All-pass chromatic dispersion over the whole record.

    Transfer function exp(-j*(beta2/2)*w^2*L); energy preserving and exactly
    inverted by the same call with ``-length_km``.
    """
    if length_km == 0.0 or d_coeff == 0.0:
        return waveform.copy()
    beta2 = beta2_from_d(d_coeff, wavelength_nm)
    w = 2.0 * np.pi * np.fft.fftfreq(len(waveform), d=1.0 / waveform.sample_rate)
    h = np.exp(-1j * 0.5 * beta2 * length_km * 1e3 * w * w)
    return DualPolWaveform(np.fft.ifft(np.fft.fft(waveform.x) * h),
                           np.fft.ifft(np.fft.fft(waveform.y) * h),
                           waveform.sample_rate, waveform.symbol_rate)


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def _apply_jones_freq(waveform, jw):
    """Apply a frequency-dependent 2x2 Jones matrix (shape (2, 2, n))."""
    fx = np.fft.fft(waveform.x)
    fy = np.fft.fft(waveform.y)
    ox = jw[0, 0] * fx + jw[0, 1] * fy
    oy = jw[1, 0] * fx + jw[1, 1] * fy
    return DualPolWaveform(np.fft.ifft(ox), np.fft.ifft(oy),
                           waveform.sample_rate, waveform.symbol_rate)


def apply_pmd(waveform, dgd_ps, sop_deg):
    """Single first-order PMD element: R(-theta) diag(e^{+jw dgd/2}, e^{-jw dgd/2}) R(theta)."""
    if dgd_ps == 0.0 and sop_deg == 0.0:
        return waveform.copy()
    w = 2.0 * np.pi * np.fft.fftfreq(len(waveform), d=1.0 / waveform.sample_rate)
    tau = dgd_ps * 1e-12
    theta = np.deg2rad(sop_deg)
    r_in = _rot(theta)
    r_out = _rot(-theta)
    dplus = np.exp(1j * w * tau / 2.0)
    dminus = np.exp(-1j * w * tau / 2.0)
    jw = np.empty((2, 2, len(w)), dtype=complex)
    for a in range(2):
        for b in range(2):
            jw[a, b] = (r_out[a, 0] * dplus * r_in[0, b]
                        + r_out[a, 1] * dminus * r_in[1, b])
    return _apply_jones_freq(waveform, jw)


def apply_pmd_sections(waveform, dgd_mean_ps_sqrt_km, length_km, seed, sections=20):
    """Statistical PMD: concatenated birefringent sections with random axes.

    Per-section DGD is ``dgd_mean * sqrt(length/sections)`` so the section
    DGDs add up in quadrature to the target mean DGD of the span.
    """
    if dgd_mean_ps_sqrt_km == 0.0 or length_km == 0.0:
        return waveform.copy()
    rng = _rng(seed, 1)
    w = 2.0 * np.pi * np.fft.fftfreq(len(waveform), d=1.0 / waveform.sample_rate)
    tau = dgd_mean_ps_sqrt_km * 1e-12 * np.sqrt(length_km / sections)
    ident = np.zeros((2, 2, len(w)), dtype=complex)
    ident[0, 0] = ident[1, 1] = 1.0
    jw = ident
    for _ in range(sections):
        theta = rng.uniform(0.0, np.pi)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        r_in = _rot(theta)
        r_out = _rot(-theta)
        dplus = np.exp(1j * (w * tau / 2.0 + phi / 2.0))
        dminus = np.exp(-1j * (w * tau / 2.0 + phi / 2.0))
        sec = np.empty_like(ident)
        for a in range(2):
            for b in range(2):
                sec[a, b] = (r_out[a, 0] * dplus * r_in[0, b]
                             + r_out[a, 1] * dminus * r_in[1, b])
        nxt = np.empty_like(ident)
        for a in range(2):
            for b in range(2):
                nxt[a, b] = sec[a, 0] * jw[0, b] + sec[a, 1] * jw[1, b]
        jw = nxt
    return _apply_jones_freq(waveform, jw)


def load_osnr(waveform, osnr_db, seed):
    """Add white Gaussian noise for a target OSNR in the 12.5 GHz reference band.

    The OSNR is defined against total signal power with the reference-band
    noise split equally between polarizations.
    """
    p_sig = np.mean(np.abs(waveform.x) ** 2) + np.mean(np.abs(waveform.y) ** 2)
    if p_sig <= 0:
        raise DegenerateSignalError("cannot set OSNR on a zero-power signal")
    p_noise_ref = p_sig / 10.0 ** (osnr_db / 10.0)
    # Flat complex noise over the simulation bandwidth, per polarization.
    var = 0.5 * p_noise_ref * waveform.sample_rate / OSNR_REF_BANDWIDTH
    rng = _rng(seed, 2)
    n = len(waveform)
    scale = np.sqrt(var / 2.0)
    nx = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    ny = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return DualPolWaveform(waveform.x + nx, waveform.y + ny,
                           waveform.sample_rate, waveform.symbol_rate)


def apply_lo_impairments(waveform, freq_offset_hz, linewidth_hz, seed):
    """Mix with an offset, phase-noisy local oscillator (same process on both pols).

    ``linewidth_hz`` is the combined linewidth of the beating lasers; the
    Wiener phase increments have variance ``2*pi*linewidth*T_samp``.
    """
    if abs(freq_offset_hz) >= waveform.sample_rate / 4.0:
        raise ConfigError("frequency offset too large for the simulation bandwidth")
    n = len(waveform)
    t_samp = 1.0 / waveform.sample_rate
    phase = 2.0 * np.pi * freq_offset_hz * t_samp * np.arange(n)
    if linewidth_hz > 0.0:
        rng = _rng(seed, 3)
        steps = rng.standard_normal(n) * np.sqrt(2.0 * np.pi * linewidth_hz * t_samp)
        phase = phase + np.cumsum(steps)
    rot = np.exp(1j * phase)
    return DualPolWaveform(waveform.x * rot, waveform.y * rot,
                           waveform.sample_rate, waveform.symbol_rate)


def inject_rx_imbalance(waveform, spec: ImbalanceSpec):
    """Apply receiver skew then amplitude/phase mixing to both pols."""
    _check_delay(spec.rx_skew_x, waveform.symbol_rate)
    _check_delay(spec.rx_skew_y, waveform.symbol_rate)
    fs = waveform.sample_rate
    x = delay_rails(waveform.x, +spec.rx_skew_x / 2.0, -spec.rx_skew_x / 2.0, fs)
    y = delay_rails(waveform.y, +spec.rx_skew_y / 2.0, -spec.rx_skew_y / 2.0, fs)
    x = _mix_rails(x, spec.rx_amp_x, spec.rx_phase_x)
    y = _mix_rails(y, spec.rx_amp_y, spec.rx_phase_y)
    return DualPolWaveform(x, y, fs, waveform.symbol_rate)


def invert_rx_imbalance(waveform, spec: ImbalanceSpec):
    """Exact algebraic inverse of :func:`inject_rx_imbalance`."""
    fs = waveform.sample_rate
    x = _unmix_rails(waveform.x, spec.rx_amp_x, spec.rx_phase_x)
    y = _unmix_rails(waveform.y, spec.rx_amp_y, spec.rx_phase_y)
    x = delay_rails(x, -spec.rx_skew_x / 2.0, +spec.rx_skew_x / 2.0, fs)
    y = delay_rails(y, -spec.rx_skew_y / 2.0, +spec.rx_skew_y / 2.0, fs)
    return DualPolWaveform(x, y, fs, waveform.symbol_rate)
