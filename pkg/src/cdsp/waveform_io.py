"""Binary waveform file format.

Layout (all little-endian): magic ``CDSP``, u32 version (1), f64 sample_rate,
f64 symbol_rate, u64 sample count n, then n records of four f64 rails
interleaved as (XI, XQ, YI, YQ).
"""

import struct

import numpy as np

from .errors import ShapeError
from .signals import DualPolWaveform

MAGIC = b"CDSP"
VERSION = 1
_HEADER = struct.Struct("<4sIddQ")


def save_waveform(path, waveform):
    """Write a dual-pol waveform to ``path`` in the CDSP binary format."""
    n = len(waveform)
    rails = np.empty((n, 4), dtype="<f8")
    rails[:, 0] = waveform.x.real
    rails[:, 1] = waveform.x.imag
    rails[:, 2] = waveform.y.real
    rails[:, 3] = waveform.y.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, waveform.sample_rate,
                              waveform.symbol_rate, n))
        fh.write(rails.tobytes())


def load_waveform(path):
    """Read a CDSP binary waveform file back into :class:`DualPolWaveform`."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ShapeError(f"{path}: truncated header")
        magic, version, sample_rate, symbol_rate, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ShapeError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ShapeError(f"{path}: unsupported version {version}")
        payload = fh.read(n * 4 * 8)
    if len(payload) != n * 4 * 8:
        raise ShapeError(f"{path}: truncated payload")
    rails = np.frombuffer(payload, dtype="<f8").reshape(n, 4)
    return DualPolWaveform(rails[:, 0] + 1j * rails[:, 1],
                           rails[:, 2] + 1j * rails[:, 3],
                           sample_rate, symbol_rate)
