"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
kernels take over. Set ``DIALOGACT_KERNELS=numpy`` to force the fallback.
"""

import os

from . import _conv_numpy

try:
    if os.environ.get("DIALOGACT_KERNELS", "").lower() == "numpy":
        raise ImportError("compiled kernels disabled by DIALOGACT_KERNELS")
    from . import _conv_cy
except ImportError:
    _conv_cy = None

BACKENDS = {"numpy": _conv_numpy}
if _conv_cy is not None:
    BACKENDS["cython"] = _conv_cy

_active = "cython" if _conv_cy is not None else "numpy"


def backend():
    return _active


def set_backend(name):
    """Switch the kernel module used by :func:`conv_maxpool`; returns the previous name."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}")
    prev, _active = _active, name
    return prev


def get(name=None):
    return BACKENDS[name or _active]
