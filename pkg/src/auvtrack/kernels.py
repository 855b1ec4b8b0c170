"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback in ``_kernels_py`` is used. ``use_backend`` switches at runtime
(tests and benchmarks exercise both).
"""

import logging

from . import _kernels_py

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

OK = _kernels_py.OK
NO_REAL_ROOT = _kernels_py.NO_REAL_ROOT
NO_POSITIVE_ROOT = _kernels_py.NO_POSITIVE_ROOT
SINGULAR_INNOVATION = _kernels_py.SINGULAR_INNOVATION
DEGENERATE_QA = _kernels_py.DEGENERATE_QA
DISC_CLAMP = _kernels_py.DISC_CLAMP
ROOT_TOL = _kernels_py.ROOT_TOL

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _compiled if _compiled is not None else _kernels_py


def available_backends():
    return sorted(_BACKENDS)


def backend():
    """Name of the active backend: ``"compiled"`` or ``"python"``."""
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name):
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}") from None
    log.debug("kernel backend set to %s", name)


def get_backend(name):
    return _BACKENDS[name]


def chan_batch(pinv, positions, deltas, c):
    return _active.chan_batch(pinv, positions, deltas, c)


def kalman_sequence(f, g, q, r, x0, p0, u, z, mask):
    return _active.kalman_sequence(f, g, q, r, x0, p0, u, z, mask)
