"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``TUMBLETRACK_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy/scipy fallback is used. ``BACKEND`` names the
active choice.
"""

import os

from . import _fallback

_force_pure = os.environ.get("TUMBLETRACK_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure-python backend requested")
    from ._kernels import KDIndex, jacobi_eigh4

    BACKEND = "compiled"
except ImportError:
    KDIndex = _fallback.KDIndex
    jacobi_eigh4 = _fallback.jacobi_eigh4
    BACKEND = "python"


def available_backends():
    """Map backend name to its ``(KDIndex, jacobi_eigh4)`` pair."""
    out = {"python": (_fallback.KDIndex, _fallback.jacobi_eigh4)}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["compiled"] = (_kernels.KDIndex, _kernels.jacobi_eigh4)
    return out


__all__ = ["BACKEND", "KDIndex", "jacobi_eigh4", "available_backends"]
