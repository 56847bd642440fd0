"""Backend selection for the hot numeric kernels.

Two implementations of every kernel exist: a numba-jitted one and a pure
numpy one.  The active backend is chosen once at import time from the
``QPSYNTH_BACKEND`` environment variable:

* ``auto`` (default): numba if it imports, numpy otherwise
* ``numba``: require numba, raise if unavailable
* ``numpy``: force the pure-numpy path

``benchmarks/bench_backends.py`` times both paths side by side.
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")


def _read_flag() -> str:
    value = os.environ.get("QPSYNTH_BACKEND", "auto").strip().lower()
    if value not in _VALID:
        raise ValueError(
            f"QPSYNTH_BACKEND must be one of {_VALID}, got {value!r}"
        )
    return value


BACKEND_FLAG = _read_flag()

if BACKEND_FLAG == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if BACKEND_FLAG == "numba":
            raise
        NUMBA_ENABLED = False

ACTIVE_BACKEND = "numba" if NUMBA_ENABLED else "numpy"
