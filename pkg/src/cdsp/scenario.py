"""Scenario records: every knob of a simulated link run in one serializable place.

Config files are plain ``key = value`` text with dotted keys (``tx.skew_x_ps``,
``channel.osnr_db``, ...).  Skews and delays are given in picoseconds, phases
in degrees; ``none`` clears an optional value.  Serialization is lossless:
floats are written with full shortest-round-trip precision.
"""

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Optional

from .equalizers import EqualizerConfig
from .errors import ConfigError
from .timing import LoopConfig
from .txdsp import ImbalanceSpec

COMPARATORS = ("none", "mimo2x2", "mimo4x4")

DESK_SYMBOLS = 2 ** 14
FULL_SYMBOLS = 2 ** 16


@dataclass
class Scenario:
    """One end-to-end run: symbol budget, impairments, channel, receiver DSP.

    Desk scale (2^14 symbols) is the default; full scale (2^16) sits behind
    ``full()``.  Exactly one chromatic-dispersion compensation site may be
    enabled: transmitter pre-chirp or receiver FDE (or neither).
    """

    n_symbols: int = DESK_SYMBOLS
    seed: int = 7

    # transmitter impairments; skew in ps, phase in degrees
    tx_skew_x_ps: float = 0.0
    tx_skew_y_ps: float = 0.0
    tx_amp_x: float = 0.0
    tx_amp_y: float = 0.0
    tx_phase_x_deg: float = 0.0
    tx_phase_y_deg: float = 0.0
    prechirp_enabled: bool = True
    # 264 is the canonical 100 km block; None derives one for the
    # configured fiber instead
    prechirp_block_size: Optional[int] = 264

    # receiver impairments and CD site
    rx_skew_x_ps: float = 0.0
    rx_skew_y_ps: float = 0.0
    rx_amp_x: float = 0.0
    rx_amp_y: float = 0.0
    rx_phase_x_deg: float = 0.0
    rx_phase_y_deg: float = 0.0
    rx_fde_enabled: bool = False

    # channel
    length_km: float = 100.0
    d_coeff: float = -16.0
    dgd_ps: Optional[float] = None
    dgd_mean: Optional[float] = 0.5
    sop_deg: float = 45.0
    osnr_db: float = 23.0
    freq_offset_hz: float = 1e9
    linewidth_hz: float = 2e5
    channel_seed: Optional[int] = None

    # clock recovery loops
    loop_bandwidth: float = 5e-4
    damping: float = 0.7071
    lock_var_threshold: float = 1e-3

    # equalizers
    cv_taps: int = 5
    rv_taps: int = 21
    mu_cma: float = 1e-3
    mu_dd: float = 3e-4
    mu_rv: float = 2e-3
    train_syms: Optional[int] = None
    comparator: str = "none"
    comparator_taps: int = 33

    # transmitter-skew scan
    scan_enabled: bool = False
    scan_step_ps: Optional[float] = None
    scan_range_ps: Optional[float] = None
    scan_metric_symbols: Optional[int] = None

    # outputs
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.n_symbols < 4096:
            raise ConfigError(
                f"n_symbols {self.n_symbols} too small; the skew monitor needs "
                "8192 samples per lane at 2 samples/symbol")
        if self.prechirp_enabled and self.rx_fde_enabled:
            raise ConfigError(
                "tx.prechirp.enabled and rx.fde.enabled are mutually exclusive; "
                "pick one CD-compensation site (or neither)")
        if self.comparator not in COMPARATORS:
            raise ConfigError(
                f"eq.comparator must be one of {COMPARATORS}, got {self.comparator!r}")
        if self.dgd_ps is not None and self.dgd_mean is not None:
            raise ConfigError(
                "channel.dgd_ps (first-order element) and channel.dgd_mean "
                "(sectioned model) are alternatives; set one of them to none")
        if self.scan_step_ps is not None and self.scan_step_ps <= 0:
            raise ConfigError("scan.step must be positive")
        if self.scan_range_ps is not None:
            if self.scan_range_ps <= 0:
                raise ConfigError("scan.range must be positive")
            step = self.scan_step_ps
            if step is not None and self.scan_range_ps < step:
                raise ConfigError("scan.range must cover at least one scan.step")
        if self.scan_metric_symbols is not None and self.scan_metric_symbols < 1:
            raise ConfigError("scan.metric_symbols must be positive")

    @classmethod
    def desk(cls, **kwargs):
        return cls(n_symbols=DESK_SYMBOLS, **kwargs)

    @classmethod
    def full(cls, **kwargs):
        return cls(n_symbols=FULL_SYMBOLS, **kwargs)

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)

    # -- derived views consumed by the pipeline stages --

    def imbalance_spec(self):
        return ImbalanceSpec(
            tx_skew_x=self.tx_skew_x_ps * 1e-12,
            tx_skew_y=self.tx_skew_y_ps * 1e-12,
            tx_amp_x=self.tx_amp_x, tx_amp_y=self.tx_amp_y,
            tx_phase_x=self.tx_phase_x_deg, tx_phase_y=self.tx_phase_y_deg,
            rx_skew_x=self.rx_skew_x_ps * 1e-12,
            rx_skew_y=self.rx_skew_y_ps * 1e-12,
            rx_amp_x=self.rx_amp_x, rx_amp_y=self.rx_amp_y,
            rx_phase_x=self.rx_phase_x_deg, rx_phase_y=self.rx_phase_y_deg,
        )

    def equalizer_config(self):
        return EqualizerConfig(
            cv_taps=self.cv_taps, rv_taps=self.rv_taps,
            comparator_taps=self.comparator_taps,
            mu_cma=self.mu_cma, mu_dd=self.mu_dd, mu_rv=self.mu_rv,
            train_syms=self.train_syms,
        )

    def loop_config(self):
        return LoopConfig(bandwidth=self.loop_bandwidth, damping=self.damping,
                          lock_var_threshold=self.lock_var_threshold)

    def effective_channel_seed(self):
        return self.seed if self.channel_seed is None else self.channel_seed

    # -- serialization --

    def to_text(self):
        """Canonical key-value text; the same bytes feed the config hash."""
        lines = []
        for key, attr, _ in _KEYS:
            lines.append(f"{key} = {_format(getattr(self, attr))}")
        return "\n".join(lines) + "\n"

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text, **overrides):
        kv = parse_kv_text(text)
        kwargs = {}
        for key, raw in kv.items():
            if key not in _BY_KEY:
                raise ConfigError(f"unknown config key {key!r}")
            attr, kind = _BY_KEY[key]
            kwargs[attr] = _parse(kind, raw, key)
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            return cls.from_text(text, **overrides)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def config_hash(self):
        """Short digest of the canonical serialized config."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    def header_lines(self):
        """Effective config as comment lines for output file headers."""
        out = [f"# config_hash = {self.config_hash()}"]
        out += [f"# {line}" for line in self.to_text().splitlines()]
        return out


# dotted config key, Scenario attribute, value kind
_KEYS = [
    ("n_symbols", "n_symbols", "int"),
    ("seed", "seed", "int"),
    ("tx.skew_x_ps", "tx_skew_x_ps", "float"),
    ("tx.skew_y_ps", "tx_skew_y_ps", "float"),
    ("tx.amp_x", "tx_amp_x", "float"),
    ("tx.amp_y", "tx_amp_y", "float"),
    ("tx.phase_x_deg", "tx_phase_x_deg", "float"),
    ("tx.phase_y_deg", "tx_phase_y_deg", "float"),
    ("tx.prechirp.enabled", "prechirp_enabled", "bool"),
    ("tx.prechirp.block_size", "prechirp_block_size", "opt_int"),
    ("rx.skew_x_ps", "rx_skew_x_ps", "float"),
    ("rx.skew_y_ps", "rx_skew_y_ps", "float"),
    ("rx.amp_x", "rx_amp_x", "float"),
    ("rx.amp_y", "rx_amp_y", "float"),
    ("rx.phase_x_deg", "rx_phase_x_deg", "float"),
    ("rx.phase_y_deg", "rx_phase_y_deg", "float"),
    ("rx.fde.enabled", "rx_fde_enabled", "bool"),
    ("channel.length_km", "length_km", "float"),
    ("channel.d_coeff", "d_coeff", "float"),
    ("channel.dgd_ps", "dgd_ps", "opt_float"),
    ("channel.dgd_mean", "dgd_mean", "opt_float"),
    ("channel.sop_deg", "sop_deg", "float"),
    ("channel.osnr_db", "osnr_db", "float"),
    ("channel.freq_offset_hz", "freq_offset_hz", "float"),
    ("channel.linewidth_hz", "linewidth_hz", "float"),
    ("channel.seed", "channel_seed", "opt_int"),
    ("cra.loop_bandwidth", "loop_bandwidth", "float"),
    ("cra.damping", "damping", "float"),
    ("cra.lock_var_threshold", "lock_var_threshold", "float"),
    ("eq.cv_taps", "cv_taps", "int"),
    ("eq.rv_taps", "rv_taps", "int"),
    ("eq.mu_cma", "mu_cma", "float"),
    ("eq.mu_dd", "mu_dd", "float"),
    ("eq.mu_rv", "mu_rv", "float"),
    ("eq.train_syms", "train_syms", "opt_int"),
    ("eq.comparator", "comparator", "str"),
    ("eq.comparator_taps", "comparator_taps", "int"),
    ("scan.enabled", "scan_enabled", "bool"),
    ("scan.step", "scan_step_ps", "opt_float"),
    ("scan.range", "scan_range_ps", "opt_float"),
    ("scan.metric_symbols", "scan_metric_symbols", "opt_int"),
    ("output.dir", "out_dir", "opt_str"),
]
_BY_KEY = {key: (attr, kind) for key, attr, kind in _KEYS}
_BY_ATTR = {attr: key for key, attr, _ in _KEYS}


def key_for_attr(attr):
    """Dotted config key for a Scenario attribute name."""
    return _BY_ATTR[attr]


def attr_for_key(key):
    """Scenario attribute name for a dotted config key."""
    if key not in _BY_KEY:
        raise ConfigError(f"unknown config key {key!r}")
    return _BY_KEY[key][0]


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(kind, raw, key):
    opt = kind.startswith("opt_")
    if opt and raw.lower() == "none":
        return None
    base = kind[4:] if opt else kind
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
        if base == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {base}") from None


def parse_value(key, raw):
    """Parse one raw config value with the kind declared for ``key``."""
    if key not in _BY_KEY:
        raise ConfigError(f"unknown config key {key!r}")
    return _parse(_BY_KEY[key][1], raw, key)


def parse_kv_text(text):
    """Key-value parser shared by scenario and sweep configs.

    Returns the raw string values keyed by dotted name; '#' starts a comment,
    blank lines are skipped, duplicate keys are an error.
    """
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        raw = raw.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = raw
    return out
