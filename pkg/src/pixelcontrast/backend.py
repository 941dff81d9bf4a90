"""Kernel backend selection.

The compiled Cython kernels are used when the extension built successfully;
otherwise the numpy fallback is. `PIXELCONTRAST_BACKEND=python|compiled`
forces a choice (forcing `compiled` without the extension is an error).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:
    _kernels_c = None

_choice = os.environ.get("PIXELCONTRAST_BACKEND", "auto")
if _choice == "python":
    kernels = _kernels_py
elif _choice == "compiled":
    if _kernels_c is None:
        raise ImportError("PIXELCONTRAST_BACKEND=compiled but the extension is not built")
    kernels = _kernels_c
elif _choice == "auto":
    kernels = _kernels_c if _kernels_c is not None else _kernels_py
else:
    raise ImportError(f"unknown PIXELCONTRAST_BACKEND {_choice!r}")

HAVE_COMPILED = _kernels_c is not None
BACKEND = kernels.BACKEND


def available_backends() -> dict:
    """Importable kernel modules keyed by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    if _kernels_c is not None:
        out["compiled"] = _kernels_c
    return out
