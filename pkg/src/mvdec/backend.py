"""Numeric backend selection.

The hot kernels in :mod:`mvdec.kernels` exist in two flavors: numba
``@njit``-compiled loops and pure-numpy fallbacks.  The active flavor is
chosen once at import from the ``MVDEC_BACKEND`` environment variable:

* ``numba``  -- require the compiled kernels (error if numba is missing)
* ``numpy``  -- force the pure-numpy path
* ``auto``   -- numba when importable, numpy otherwise (default)

`set_backend` allows switching at runtime, which the benchmark and the
kernel parity tests use to compare both paths in one process.
"""

from __future__ import annotations

import os

VALID_BACKENDS = ("numba", "numpy")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def resolve_backend(name: str) -> str:
    """Map a requested backend name ('auto' allowed) to a concrete one."""
    name = name.strip().lower()
    if name in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if name not in VALID_BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; expected one of {VALID_BACKENDS + ('auto',)}"
        )
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("MVDEC_BACKEND=numba requested but numba is not importable")
    return name


_active = resolve_backend(os.environ.get("MVDEC_BACKEND", "auto"))


def get_backend() -> str:
    """Name of the currently active kernel backend ('numba' or 'numpy')."""
    return _active


def set_backend(name: str) -> str:
    """Switch the active backend; returns the resolved concrete name."""
    global _active
    _active = resolve_backend(name)
    return _active
