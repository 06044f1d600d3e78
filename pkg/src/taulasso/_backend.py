"""Kernel backend selection.

Set ``TAULASSO_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. Numba is also skipped silently when it cannot be imported.
"""
import os

from . import _kernels_numpy

_FALSY = {"", "0", "false", "no", "off"}


def numba_requested():
    return os.environ.get("TAULASSO_DISABLE_NUMBA", "").strip().lower() in _FALSY


def _load():
    if not numba_requested():
        return _kernels_numpy, "numpy"
    try:
        from . import _kernels_numba
    except ImportError:
        return _kernels_numpy, "numpy"
    return _kernels_numba, "numba"


kernels, BACKEND = _load()


def get_kernels(name=None):
    """Return a kernel module by name ('numba' or 'numpy'), default the active one."""
    if name is None:
        return kernels
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown backend {name!r}")
