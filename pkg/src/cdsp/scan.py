"""Rough TX IQ-skew estimation by scanning trial delays against the CV-MIMO error.

The controller injects a compensating delay at the transmitter for every grid
value, re-runs the chain through the CV-MIMO stage, and reads the converged
mean squared error; the grid value whose compensation gives the smallest error
is the skew estimate.  One polarization is scanned at a time; a session scans
X then Y from the same baseline and merges the results.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import pipeline
from .equalizers import cv_mimo
from .errors import ConfigError, DspError, InsufficientDataError, ScanError
from .timing import compensate_rx_skew, monitor_rx_skew
from .txdsp import apply_scan_delay

#: symbols discarded from the head of the error trace before the metric window
SCAN_SKIP = 8192
#: default metric window length (full-scale records)
DEFAULT_METRIC_SYMBOLS = 2 ** 14
#: metric contrast below which the scan refuses to pick a minimum
CONTRAST_THRESHOLD = 0.05
#: tap count of the scan stage's reduced butterfly
SCAN_CV_TAPS = 3
#: symbols and lag reach used to match equalizer outputs to transmit pols
LANE_ID_SYMBOLS = 4096
LANE_ID_MAX_LAG = 128


@dataclass
class ScanResult:
    """Grid metrics and the chosen compensation delays (grid in seconds)."""

    grid: np.ndarray
    mse_x: np.ndarray
    mse_y: np.ndarray
    chosen_tau_x: Optional[float]
    chosen_tau_y: Optional[float]
    reliable: bool


def scan_grid(symbol_rate=pipeline.SYMBOL_RATE, step=None, span=None):
    """Symmetric delay grid; defaults to -3T/16 .. +3T/16 in T/16 steps."""
    t_sym = 1.0 / symbol_rate
    step = t_sym / 16.0 if step is None else step
    span = 3.0 * t_sym / 16.0 if span is None else span
    if step <= 0 or span < step:
        raise ConfigError("scan grid needs step > 0 and range >= step")
    k = int(round(span / step))
    return np.arange(-k, k + 1) * step


def _grid_for(scenario):
    step = None if scenario.scan_step_ps is None else scenario.scan_step_ps * 1e-12
    span = None if scenario.scan_range_ps is None else scenario.scan_range_ps * 1e-12
    return scan_grid(pipeline.SYMBOL_RATE, step, span)


def scan_metric(error_trace, n_symbols=DEFAULT_METRIC_SYMBOLS, skip=SCAN_SKIP):
    """Mean squared error magnitude over the post-convergence window.

    The first ``skip`` entries cover equalizer convergence and are never
    counted; the metric averages |e|^2 over the ``n_symbols`` entries after
    them.
    """
    if n_symbols < 1:
        raise ConfigError(f"metric window must be positive, got {n_symbols}")
    e = np.asarray(error_trace)
    if len(e) - skip < n_symbols:
        raise InsufficientDataError(
            f"error trace has {max(len(e) - skip, 0)} post-convergence symbols, "
            f"metric needs {n_symbols}")
    window = e[skip:skip + n_symbols]
    return float(np.mean(np.abs(window) ** 2))


def _metric_window(scenario, trace_len):
    if scenario.scan_metric_symbols is not None:
        return scenario.scan_metric_symbols
    return min(DEFAULT_METRIC_SYMBOLS, trace_len - SCAN_SKIP)


def _contrast(metric):
    """Relative spread (max-min)/min of one metric column."""
    lo, hi = float(np.min(metric)), float(np.max(metric))
    if lo == 0.0:
        return np.inf if hi > 0.0 else 0.0
    return (hi - lo) / lo


def _scan_eq_config(scenario, window):
    # The scan stage equalizes with a short butterfly only: 3 taps suffice
    # once RX skew is compensated, and the residual ISI they leave raises the
    # metric floor so a noise-dominated record no longer clears the contrast
    # threshold.  Training runs constant-modulus through the first quarter of
    # the metric window and radius-directed for the rest; the blended window
    # keeps the metric rising with residual-image power even when a large
    # amplitude imbalance pushes the radius errors past their fold point.
    return replace(scenario.equalizer_config(),
                   cv_taps=SCAN_CV_TAPS,
                   train_syms=SCAN_SKIP + max(1, window // 4))


def _radius_match(out, ref_power, skip, n, max_lag):
    a = np.abs(out[skip:skip + n]) ** 2
    a = a - a.mean()
    b = ref_power[max(0, skip - max_lag):skip + n + max_lag]
    c = np.correlate(b, a, mode="valid")
    return float(np.max(np.abs(c))) / (np.linalg.norm(a) * np.linalg.norm(b) + 1e-30)


def _identify_lanes(out_x, out_y, frame):
    """True when equalizer lane X carries transmit pol X (no demux swap).

    The butterfly converges to an arbitrary polarization permutation, and the
    permutation can differ between grid points.  Symbol radius patterns are
    unaffected by the uncompensated carrier, so correlating |out|^2 against
    the known |symbol|^2 sequence of each pol resolves the permutation
    blindly with respect to phase.
    """
    skip, max_lag = SCAN_SKIP, LANE_ID_MAX_LAG
    n = min(LANE_ID_SYMBOLS, len(out_x) - skip - 1)
    px = np.abs(frame.symbols_x) ** 2
    py = np.abs(frame.symbols_y) ** 2
    px = px - px.mean()
    py = py - py.mean()
    straight = (_radius_match(out_x, px, skip, n, max_lag)
                + _radius_match(out_y, py, skip, n, max_lag))
    swapped = (_radius_match(out_x, py, skip, n, max_lag)
               + _radius_match(out_y, px, skip, n, max_lag))
    return straight >= swapped


def run_scan(scenario, pol, tx_wave=None, frame=None):
    """Scan one polarization's delay grid and pick the compensation delay.

    ``frame`` and ``tx_wave`` are the symbol frame and impaired transmit
    waveform from :func:`pipeline.synthesize_tx`; omit them to have the scan
    synthesize its own from the scenario.  The returned result carries both
    polarizations' metrics over the grid but only the scanned polarization's
    chosen delay.
    """
    if pol not in ("x", "y"):
        raise ConfigError(f"pol must be 'x' or 'y', got {pol!r}")
    if tx_wave is None or frame is None:
        frame, tx_wave = pipeline.synthesize_tx(scenario)
    grid = _grid_for(scenario)
    lcfg = scenario.loop_config()
    mse_x = np.empty(len(grid))
    mse_y = np.empty(len(grid))
    cfg = None
    for i, tau in enumerate(grid):
        try:
            # trial compensation: undo a hypothetical skew of tau, so the
            # metric minimum sits at the actual skew value
            trial = apply_scan_delay(tx_wave,
                                     -tau if pol == "x" else 0.0,
                                     -tau if pol == "y" else 0.0)
            w = pipeline.transmit(scenario, trial)
            w2 = pipeline.orthogonalize(scenario, w)
            est = monitor_rx_skew(w2, lcfg)
            w2 = compensate_rx_skew(w2, est)
            if cfg is None:
                cfg = _scan_eq_config(scenario, _metric_window(scenario, len(frame)))
            out_x, out_y, state = cv_mimo(w2, cfg)
        except DspError as exc:
            raise ScanError(
                f"scan aborted at tau = {tau * 1e12:+.2f} ps on pol "
                f"{pol.upper()}: {exc}", tau=tau) from exc
        n = _metric_window(scenario, len(state.err_x))
        m_a = scan_metric(state.err_x, n)
        m_b = scan_metric(state.err_y, n)
        # Attribute each error lane to the transmit pol it demultiplexes, so
        # the scanned pol's column tracks its own distortion even when the
        # converged permutation flips between grid points.
        if _identify_lanes(out_x, out_y, frame):
            mse_x[i], mse_y[i] = m_a, m_b
        else:
            mse_x[i], mse_y[i] = m_b, m_a
    own = mse_x if pol == "x" else mse_y
    # argmin with ties broken toward the smallest |tau|
    order = np.lexsort((np.abs(grid), own))
    chosen = float(grid[order[0]])
    reliable = bool(_contrast(own) >= CONTRAST_THRESHOLD)
    return ScanResult(
        grid=grid, mse_x=mse_x, mse_y=mse_y,
        chosen_tau_x=chosen if pol == "x" else None,
        chosen_tau_y=chosen if pol == "y" else None,
        reliable=reliable)


def run_scan_session(scenario, tx_wave=None, frame=None):
    """Scan X then Y sequentially from the same baseline and merge.

    Each polarization's metric column comes from its own scan, honoring the
    one-delay-at-a-time rule.  The session is reliable when at least one
    scan resolved a minimum: an unskewed polarization legitimately presents
    a flat metric, while record-wide noise (low OSNR) flattens both.
    """
    if tx_wave is None or frame is None:
        frame, tx_wave = pipeline.synthesize_tx(scenario)
    res_x = run_scan(scenario, "x", tx_wave, frame)
    res_y = run_scan(scenario, "y", tx_wave, frame)
    return ScanResult(
        grid=res_x.grid, mse_x=res_x.mse_x, mse_y=res_y.mse_y,
        chosen_tau_x=res_x.chosen_tau_x, chosen_tau_y=res_y.chosen_tau_y,
        reliable=res_x.reliable or res_y.reliable)


def compensate_tx_skew(waveform, result):
    """Apply the chosen delays in reverse at the transmitter."""
    if not result.reliable:
        raise ScanError("refusing to compensate from an unreliable scan")
    tau_x = result.chosen_tau_x or 0.0
    tau_y = result.chosen_tau_y or 0.0
    return apply_scan_delay(waveform, -tau_x, -tau_y)


def csv_lines(result):
    """Per-grid-point CSV rows: tau_ps, mse_x, mse_y."""
    lines = ["tau_ps,mse_x,mse_y"]
    for tau, mx, my in zip(result.grid, result.mse_x, result.mse_y):
        lines.append(f"{tau * 1e12!r},{mx!r},{my!r}")
    return lines
