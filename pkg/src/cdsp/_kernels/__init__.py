"""Hot-kernel backend selection.

The compiled extension is preferred; the pure-python reference is used
when it is missing (or when explicitly requested, e.g. for benchmarks).
The two backends are bit-identical, not merely close.
"""

from . import _ref

try:
    from . import _core
    _impl = _core
except ImportError:
    _core = None
    _impl = _ref

BACKEND = _impl.BACKEND_NAME


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None=active)."""
    if name is None:
        return _impl
    if name == "python":
        return _ref
    if name == "cython" and _core is not None:
        return _core
    raise ValueError(f"kernel backend {name!r} not available")


def cra_loop(lane, kp, ki, step=1.0):
    return _impl.cra_loop(lane, kp, ki, step)


def cv_mimo_run(*args, **kwargs):
    return _impl.cv_mimo_run(*args, **kwargs)


def ddlms_2x2_run(*args, **kwargs):
    return _impl.ddlms_2x2_run(*args, **kwargs)


def mimo4x4_run(*args, **kwargs):
    return _impl.mimo4x4_run(*args, **kwargs)
