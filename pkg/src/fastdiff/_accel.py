"""Optional numba acceleration.

Hot loops are written twice: a numba ``@njit`` loop and a vectorised numpy
version.  Setting ``FASTDIFF_DISABLE_NUMBA=1`` (or running without numba
installed) selects the numpy path at import time; :func:`set_backend` switches
at runtime, which the benchmark and the equivalence tests use.
"""
from __future__ import annotations

import os

ENV_FLAG = "FASTDIFF_DISABLE_NUMBA"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None


def numba_disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, nogil=True, error_model="numpy")(func)


_backend = "numba" if HAVE_NUMBA and not numba_disabled_by_env() else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    previous, _backend = _backend, name
    return previous
