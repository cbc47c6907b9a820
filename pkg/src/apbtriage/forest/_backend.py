"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback takes over. ``use_backend`` switches explicitly, mainly for the
benchmark and the cross-backend equivalence tests.
"""
from __future__ import annotations

from types import ModuleType

from . import _pykernels

try:
    from . import _kernels as _native
except ImportError:  # extension not built
    _native = None

_active: ModuleType = _native if _native is not None else _pykernels


def native_available() -> bool:
    return _native is not None


def active_backend() -> str:
    return "native" if _active is _native else "python"


def use_backend(name: str) -> None:
    global _active
    if name == "native":
        if _native is None:
            raise RuntimeError("native kernels are not built; run `pip install -e .` first")
        _active = _native
    elif name == "python":
        _active = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")


def kernels() -> ModuleType:
    return _active
