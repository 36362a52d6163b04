"""Backend selection for the sparse-vector kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``UCWFP_PURE=1`` to force the fallback, or call :func:`use` at runtime.
Callers must go through this module's attributes (``kernels.sparse_dist``),
never bind the functions locally, so that :func:`use` takes effect.
"""
from __future__ import annotations

import os

from ucwfp import _pykernels

try:
    from ucwfp import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_NAMES = ("sparse_combine", "sparse_dist", "sparse_norm", "gk_step")

BACKEND = ""


def use(name: str) -> None:
    """Switch every kernel to backend ``name`` ("compiled" or "python")."""
    global BACKEND
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}")
    mod = BACKENDS[name]
    for fn in _NAMES:
        globals()[fn] = getattr(mod, fn)
    BACKEND = name


def available() -> list[str]:
    return sorted(BACKENDS)


use("python" if os.environ.get("UCWFP_PURE") or _compiled is None else "compiled")
