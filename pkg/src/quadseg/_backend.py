"""Kernel backend selection.

The compiled extension ``quadseg._kernels`` is used when it imported cleanly
and the environment variable ``QUADSEG_FORCE_NUMPY`` is not set to 1; in all
other cases the pure-numpy twins in ``quadseg._kernels_py`` take over. Both
expose the same functions with identical semantics, so callers go through
:func:`get_kernels` and never care which one they got.
"""

from __future__ import annotations

import os

from quadseg import _kernels_py

try:
    from quadseg import _kernels as _ext
except ImportError:
    _ext = None


def _forced_numpy() -> bool:
    return os.environ.get("QUADSEG_FORCE_NUMPY", "0") == "1"


def using_extension() -> bool:
    return _ext is not None and not _forced_numpy()


def backend_name() -> str:
    return "cython" if using_extension() else "numpy"


def get_kernels():
    """Module providing warp/edt/jlf kernels for the active backend."""
    return _ext if using_extension() else _kernels_py


def get_kernels_by_name(name: str):
    """Explicit backend lookup, used by equivalence tests and the benchmark."""
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        if _ext is None:
            raise RuntimeError("compiled extension is not available")
        return _ext
    raise ValueError(f"unknown backend {name!r}")
