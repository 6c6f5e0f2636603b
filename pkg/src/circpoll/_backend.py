"""Select the replication kernels: compiled if available, else pure Python.

Set ``CIRCPOLL_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

_compiled: ModuleType | None
try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _compiled = None


def compiled_available() -> bool:
    return _compiled is not None


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` ("compiled", "python" or None for the default)."""
    if name is None:
        if os.environ.get("CIRCPOLL_PURE_PYTHON") or _compiled is None:
            return _pykernels
        return _compiled
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython and a C compiler")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def backend_name(mod: ModuleType | None = None) -> str:
    mod = mod or get_backend()
    return "python" if mod is _pykernels else "compiled"
