"""Gardner clock recovery and the four-lane RX IQ-skew monitor.

Each real rail (XI, XQ, YI, YQ) gets its own clock-recovery loop; the
fractional interpolation intervals the four loops settle to encode the
per-rail sampling instants.  The monitor averages the wrapped I-minus-Q
interval differences and converts them to seconds with the 2-per-symbol
sample period; it never touches the signal path.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EstimationError, LockError, ShapeError
from .signals import DualPolWaveform
from .txdsp import delay_rails

#: Gardner detector gain (mean error magnitude per sample-unit timing offset)
#: for a unit-power raised-cosine rail, rolloff 0.5, at 2 samples/symbol.
#: Used to normalize the loop gains so the design bandwidth is met.
TED_GAIN = 0.877

MIN_LANE_SAMPLES = 8192


def gardner_ted(sample_early, sample_mid, sample_late):
    """Gardner timing-error detector on one real lane: (late - early) * mid."""
    return (sample_late - sample_early) * sample_mid


@dataclass
class LoopConfig:
    """Clock-recovery loop settings (per-symbol update)."""

    bandwidth: float = 5e-4       # loop noise bandwidth times symbol period
    damping: float = 0.7071
    lock_var_threshold: float = 1e-3
    lock_window: int = 1024
    #: fraction of the record skipped before interval averaging; the loop
    #: settles well after lock is first declared, and residual acquisition
    #: transient would bias skew estimates toward zero
    settle_fraction: float = 0.25

    def gains(self):
        """Proportional/integral gains from bandwidth and damping."""
        zeta = self.damping
        theta = self.bandwidth / (zeta + 1.0 / (4.0 * zeta))
        denom = (1.0 + 2.0 * zeta * theta + theta * theta) * TED_GAIN
        kp = 4.0 * zeta * theta / denom
        ki = 4.0 * theta * theta / denom
        return kp, ki


@dataclass
class ClockRecoveryState:
    """Loop outcome for one lane."""

    mu_history: np.ndarray
    locked: bool
    lock_index: int
    mu_variance: float
    nco_phase: float = 0.0
    integrator: float = 0.0


@dataclass
class SkewEstimate:
    """Differential I/Q delay per polarization, in picoseconds."""

    x_skew_ps: float
    y_skew_ps: float
    confidence: int = 0
    mu_means: dict = field(default_factory=dict)


def wrap_interval(delta):
    """Wrap fractional-interval differences to (-0.5, +0.5]."""
    return delta - np.ceil(delta - 0.5)


def _circular_mean(mu):
    ang = 2.0 * np.pi * mu
    return (np.arctan2(np.mean(np.sin(ang)), np.mean(np.cos(ang)))
            / (2.0 * np.pi)) % 1.0


def _circular_var(mu):
    dev = wrap_interval(mu - _circular_mean(mu))
    return float(np.mean(dev * dev))


def _detect_lock(mu, cfg):
    win = cfg.lock_window
    if len(mu) < win:
        return False, -1, _circular_var(mu) if len(mu) else np.inf
    stride = max(1, win // 4)
    for start in range(0, len(mu) - win + 1, stride):
        v = _circular_var(mu[start:start + win])
        if v < cfg.lock_var_threshold:
            return True, start + win, v
    return False, -1, _circular_var(mu[-win:])


def _upsample2(lane):
    """Exact 2x oversampling by spectral zero padding (band < old Nyquist)."""
    spec = np.fft.rfft(lane)
    return np.fft.irfft(spec, 2 * len(lane)) * 2.0


def recover_clock(lane, cfg=None):
    """Run the Gardner loop on one real lane at 2 samples/symbol.

    The lane is oversampled 2x internally so the 4-point cubic interpolator
    works well below its band edge; the loop itself still updates at
    half-symbol spacing.  Returns the retimed lane (mid/strobe interpolant
    stream) and the loop state.  Raises :class:`LockError` when the interval
    variance never drops below the lock threshold.
    """
    cfg = cfg or LoopConfig()
    lane = np.asarray(lane, dtype=np.float64)
    if lane.ndim != 1:
        raise ShapeError("lane must be one-dimensional")
    if len(lane) < MIN_LANE_SAMPLES:
        raise ShapeError(f"lane too short ({len(lane)} < {MIN_LANE_SAMPLES} samples)")
    rms = np.sqrt(np.mean(lane * lane))
    if rms == 0.0:
        raise ShapeError("lane carries no signal")
    kp, ki = cfg.gains()
    out, mu = _kernels.cra_loop(_upsample2(lane / rms), kp, ki, step=2.0)
    locked, lock_index, var = _detect_lock(mu, cfg)
    state = ClockRecoveryState(mu_history=mu, locked=locked,
                               lock_index=lock_index, mu_variance=var)
    if not locked:
        raise LockError(f"clock recovery did not settle (variance {var:.2e})",
                        mu_variance=var)
    return out * rms, state


def monitor_rx_skew(waveform, cfg=None, return_states=False):
    """Estimate per-polarization RX IQ skew from four independent loops.

    Expects the waveform at 2 samples/symbol after orthogonalization, with
    chromatic dispersion absent from the link (pre-compensated at the
    transmitter); a read-only observer of the signal path.  With
    ``return_states`` the per-lane loop states (full interval histories)
    come back alongside the estimate.
    """
    cfg = cfg or LoopConfig()
    if abs(waveform.sps - 2.0) > 1e-9:
        raise ShapeError(f"monitor needs 2 samples/symbol, got {waveform.sps:g}")
    lanes = {"xi": waveform.x.real, "xq": waveform.x.imag,
             "yi": waveform.y.real, "yq": waveform.y.imag}
    states = {}
    for name, lane in lanes.items():
        try:
            _, states[name] = recover_clock(lane, cfg)
        except LockError as exc:
            raise EstimationError(f"lane {name} failed to lock: {exc}") from exc

    t_samp = 1.0 / waveform.sample_rate
    means = {}
    skew_ps = {}
    confidence = 0
    for pol, (i_lane, q_lane) in {"x": ("xi", "xq"), "y": ("yi", "yq")}.items():
        si, sq = states[i_lane], states[q_lane]
        n = min(len(si.mu_history), len(sq.mu_history))
        start = max(si.lock_index, sq.lock_index, int(cfg.settle_fraction * n))
        if n - start < 2:
            raise EstimationError(f"no post-lock window on polarization {pol}")
        diff = wrap_interval(si.mu_history[start:n] - sq.mu_history[start:n])
        skew_ps[pol] = float(np.mean(diff)) * t_samp * 1e12
        means[i_lane] = _circular_mean(si.mu_history[start:n])
        means[q_lane] = _circular_mean(sq.mu_history[start:n])
        confidence = max(confidence, n - start)
    estimate = SkewEstimate(x_skew_ps=skew_ps["x"], y_skew_ps=skew_ps["y"],
                            confidence=confidence, mu_means=means)
    if return_states:
        return estimate, states
    return estimate


def compensate_rx_skew(waveform, estimate):
    """Remove the estimated RX skew with exact inverse rail delays."""
    fs = waveform.sample_rate
    tau_x = estimate.x_skew_ps * 1e-12
    tau_y = estimate.y_skew_ps * 1e-12
    x = delay_rails(waveform.x, -tau_x / 2.0, +tau_x / 2.0, fs)
    y = delay_rails(waveform.y, -tau_y / 2.0, +tau_y / 2.0, fs)
    return DualPolWaveform(x, y, fs, waveform.symbol_rate)
