"""Backend selection for the hot loops.

Numba-compiled kernels are used when numba imports and ``LOGICAGG_NUMBA``
is not set to ``0``/``false``/``off``; otherwise the pure-numpy versions run.
Both expose the same function signatures.
"""

from __future__ import annotations

import os
import warnings

_FLAG = os.environ.get("LOGICAGG_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "off", "no")

HAVE_NUMBA = False
if _WANT_NUMBA:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba not importable; using the numpy kernels", RuntimeWarning)

from . import _kernels_numpy  # noqa: E402

if HAVE_NUMBA:
    from . import _kernels_numba as _active
else:
    _active = _kernels_numpy

BACKEND = "numba" if HAVE_NUMBA else "numpy"

fista = _active.fista


def get_backend(name: str | None = None):
    """Kernel module by name (``"numba"``/``"numpy"``); default is the active one."""
    if name is None:
        return _active
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown backend {name!r}")
