"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The Cython extension ``_ckernels`` is used when it was built and
``NUEDKIT_PURE_PYTHON`` is not set to ``1``; otherwise ``_pykernels``.
"""

from __future__ import annotations

import importlib
import os

from . import _pykernels
from ._pykernels import BLOWUP, COMPLETED, MAX_STEPS, STEP_BUDGET, STEP_FAILURE, dopri5

__all__ = ["BACKEND", "dopri5", "dopri5_poly", "envelope_max", "load_backend", "COMPLETED", "BLOWUP", "STEP_FAILURE",
           "STEP_BUDGET", "MAX_STEPS"]


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module(f"{__name__}._ckernels")
    raise ValueError(f"unknown backend {name!r}")


def _select():
    if os.environ.get("NUEDKIT_PURE_PYTHON") == "1":
        return "python", _pykernels
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", _pykernels


BACKEND, _impl = _select()
dopri5_poly = _impl.dopri5_poly
envelope_max = _impl.envelope_max
