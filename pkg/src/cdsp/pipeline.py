"""End-to-end scenario execution: TX DSP, fiber emulation, receiver lanes.

The proposed receiver lane is GSOP -> skew monitor/compensation -> CV-MIMO ->
carrier recovery -> RV-DD-LMS.  The comparator lanes keep the front end (with
orthogonalization for the 2x2, without it for the 4x4, which handles the rail
mixing itself) and replace everything after it with one wide butterfly plus
blind phase search.
"""

from dataclasses import dataclass, field
from typing import Optional

from . import _kernels, complexity
from .channel import (apply_cd, apply_lo_impairments, apply_pmd,
                      apply_pmd_sections, inject_rx_imbalance, load_osnr)
from .equalizers import (bps, cv_mimo, fde_cd_compensate, foe_cpr, gsop,
                         mimo2x2, mimo4x4, rv_ddlms)
from .errors import DspError, StageError
from .signals import (QualityMetrics, frame_from_symbols, measure_quality,
                      pulse_shape, random_frame, resample)
from .timing import SkewEstimate, compensate_rx_skew, monitor_rx_skew
from .txdsp import ChirpFilterSpec, inject_tx_imbalance, prechirp_cd_compensate

SYMBOL_RATE = 36e9
ROLLOFF = 0.5
TX_SPS = 4
WAVELENGTH_NM = 1552.5


def quality_skip(n_symbols):
    """Symbols discarded before BER counting while the adaptive stages settle."""
    return min(6144, (3 * n_symbols) // 8)


class _Stager:
    """Wraps chain calls so failures carry the stage name and config hash."""

    def __init__(self, config_hash):
        self.config_hash = config_hash

    def __call__(self, name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except DspError as exc:
            raise StageError(name, self.config_hash, exc) from exc


def synthesize_tx(scenario):
    """Data generation through TX imbalance injection, at 4 samples/symbol.

    Returns the reference frame and the impaired waveform; the TX-skew scan
    splices its trial delays in right after this point.
    """
    frame = random_frame(scenario.n_symbols, seed=scenario.seed)
    w = pulse_shape(frame, ROLLOFF, TX_SPS, symbol_rate=SYMBOL_RATE)
    w = inject_tx_imbalance(w, scenario.imbalance_spec())
    return frame, w


def transmit(scenario, waveform):
    """Pre-chirp (if enabled), fiber, noise loading, LO mixing, RX imbalance."""
    s = scenario
    w = waveform
    if s.prechirp_enabled:
        spec = ChirpFilterSpec.from_fiber(
            s.d_coeff, WAVELENGTH_NM, s.length_km, w.sample_rate,
            block_size=s.prechirp_block_size)
        w = prechirp_cd_compensate(w, spec)
    w = apply_cd(w, s.d_coeff, s.length_km, WAVELENGTH_NM)
    seed = s.effective_channel_seed()
    if s.dgd_ps is not None:
        w = apply_pmd(w, s.dgd_ps, s.sop_deg)
    elif s.dgd_mean:
        w = apply_pmd_sections(w, s.dgd_mean, s.length_km, seed=seed)
    w = load_osnr(w, s.osnr_db, seed=seed)
    w = apply_lo_impairments(w, s.freq_offset_hz, s.linewidth_hz, seed=seed)
    w = inject_rx_imbalance(w, s.imbalance_spec())
    return w


def orthogonalize(scenario, waveform):
    """GSOP, optional receiver-side CD FDE, then downsampling to 2 sps."""
    w = gsop(waveform)
    if scenario.rx_fde_enabled:
        w = fde_cd_compensate(w, scenario.length_km * 1e3, scenario.d_coeff,
                              WAVELENGTH_NM)
    return resample(w, 2)


def generate_waveform(scenario):
    """Receiver-input waveform for a scenario (the gen-waveform payload)."""
    _, txw = synthesize_tx(scenario)
    return transmit(scenario, txw)


@dataclass
class ScenarioResult:
    """Structured outcome of one scenario run."""

    scenario: object
    config_hash: str
    quality: QualityMetrics
    skew: Optional[SkewEstimate]
    scan: Optional[object]
    complexity: complexity.ComplexityReport
    foe_hz: Optional[float] = None
    backend: str = _kernels.BACKEND
    mu_histories: Optional[dict] = None
    error_traces: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)


def run_scenario(scenario, collect_mu=False, collect_error=False):
    """Execute one scenario end to end and assemble the result record.

    Any stage failure surfaces as :class:`StageError` carrying the stage name
    and the scenario's config hash.
    """
    s = scenario
    # resolve derived configs eagerly: bad values are config errors, not
    # stage failures
    cfg = s.equalizer_config()
    lcfg = s.loop_config()
    s.imbalance_spec()
    stage = _Stager(s.config_hash())

    frame, txw = stage("tx", synthesize_tx, s)

    scan_result = None
    if s.scan_enabled:
        from . import scan as scan_mod  # deferred: scan drives this pipeline
        scan_result = stage("scan", scan_mod.run_scan_session, s, txw, frame)
        if scan_result.reliable:
            txw = stage("scan-comp", scan_mod.compensate_tx_skew, txw, scan_result)

    w = stage("channel", transmit, s, txw)

    skew_est = None
    foe_hz = None
    mu_histories = None
    error_traces = None
    diagnostics = {}
    if s.comparator == "none":
        w2 = stage("orthogonalize", orthogonalize, s, w)
        if collect_mu:
            skew_est, states = stage("skew-monitor", monitor_rx_skew, w2, lcfg,
                                     return_states=True)
            mu_histories = {name: st.mu_history for name, st in states.items()}
        else:
            skew_est = stage("skew-monitor", monitor_rx_skew, w2, lcfg)
        w2 = stage("skew-comp", compensate_rx_skew, w2, skew_est)
        ox, oy, cv_state = stage("cv-mimo", cv_mimo, w2, cfg)
        cx, cy, foe_hz, (phx, phy) = stage("foe-cpr", foe_cpr, ox, oy,
                                           w2.symbol_rate)
        rx, ry, rv_state = stage("rv-ddlms", rv_ddlms, cx, cy, cfg, phx, phy)
        decided = frame_from_symbols(rx, ry)
        if collect_error:
            error_traces = {"cv_err_x": cv_state.err_x, "cv_err_y": cv_state.err_y,
                            "rv_err_x": rv_state.err_x, "rv_err_y": rv_state.err_y}
        diagnostics["cv_converged"] = cv_state.converged
    elif s.comparator == "mimo2x2":
        w2 = stage("orthogonalize", orthogonalize, s, w)
        ox, oy, st = stage("comparator-2x2", mimo2x2, w2, cfg=cfg)
        sx, _ = stage("bps", bps, ox)
        sy, _ = stage("bps", bps, oy)
        decided = frame_from_symbols(sx, sy)
        if collect_error:
            error_traces = {"eq_err_x": st.err_x, "eq_err_y": st.err_y}
    else:
        # the 4x4 works on raw rails; orthogonalizing first would hide the
        # receiver imbalance it is supposed to absorb
        wr = w
        if s.rx_fde_enabled:
            wr = stage("rx-fde", fde_cd_compensate, wr, s.length_km * 1e3,
                       s.d_coeff, WAVELENGTH_NM)
        w2 = stage("resample", resample, wr, 2)
        ox, oy, st = stage("comparator-4x4", mimo4x4, w2, cfg=cfg)
        sx, _ = stage("bps", bps, ox)
        sy, _ = stage("bps", bps, oy)
        decided = frame_from_symbols(sx, sy)
        if collect_error:
            error_traces = {"eq_err_x": st.err_x, "eq_err_y": st.err_y}

    quality = stage("quality", measure_quality, decided, frame,
                    quality_skip(s.n_symbols))
    report = complexity.report_for_scenario(s)
    return ScenarioResult(
        scenario=s, config_hash=s.config_hash(), quality=quality,
        skew=skew_est, scan=scan_result, complexity=report, foe_hz=foe_hz,
        mu_histories=mu_histories, error_traces=error_traces,
        diagnostics=diagnostics)
