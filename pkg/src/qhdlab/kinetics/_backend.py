"""Pick the kernel module at import: compiled core if built, else numpy.

``QHD_BACKEND=python`` forces the fallback (used by the benchmark and the
cross-backend tests).
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _core_py

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None


def available() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get(name: str | None = None) -> ModuleType:
    name = name or os.environ.get("QHD_BACKEND", "").strip().lower() or "auto"
    if name == "python":
        return _core_py
    if name in ("compiled", "auto"):
        if _compiled is not None:
            return _compiled
        if name == "compiled":
            raise ImportError("compiled kinetics core is not built")
        return _core_py
    raise ValueError(f"unknown backend {name!r}")


def threads() -> int:
    """Thread cap from ``QHD_THREADS``; 0 lets OpenMP decide."""
    raw = os.environ.get("QHD_THREADS", "0").strip() or "0"
    return max(int(raw), 0)


core = get()
