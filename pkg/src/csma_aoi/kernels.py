"""Kernel backend selection: compiled extension if available, else pure Python.

Both backends expose ``simulate_slots``, ``queue_sim`` and ``rng_stream``
with identical semantics and identical random streams.  Set the environment
variable ``CSMA_AOI_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel
except ImportError:  # extension not built; pure Python still works
    _kernel = None

if _kernel is None or os.environ.get("CSMA_AOI_BACKEND") == "python":
    _active = _kernel_py
else:
    _active = _kernel


def backend_name():
    """Name of the kernel backend in use: 'c' or 'python'."""
    return _active.BACKEND


def get_kernel(backend=None):
    """Return a kernel module: the active one, or an explicit backend by name."""
    if backend is None:
        return _active
    if backend == "python":
        return _kernel_py
    if backend == "c":
        if _kernel is None:
            raise RuntimeError("compiled kernel is not available")
        return _kernel
    raise ValueError(f"unknown backend {backend!r}")


def available_backends():
    return ("c", "python") if _kernel is not None else ("python",)
