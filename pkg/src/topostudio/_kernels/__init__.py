"""Numerical kernel selection: compiled extension when available, numpy otherwise.

The compiled module is optional; building without a C toolchain simply loses
speed, not functionality.  Set TOPOSTUDIO_PURE=1 to force the numpy path.
"""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _core  # type: ignore[attr-defined]
except ImportError:
    _core = None

_FORCE_PURE = bool(os.environ.get("TOPOSTUDIO_PURE"))
_active = _fallback if (_core is None or _FORCE_PURE) else _core


def backend_name() -> str:
    return "pure" if _active is _fallback else "compiled"


def available_backends() -> list[str]:
    return ["pure"] if _core is None else ["pure", "compiled"]


def get_impl(name: str):
    """Kernel module by name; used by parity tests and the benchmark."""
    if name == "pure":
        return _fallback
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernels are not built")
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


pcg_solve = _active.pcg_solve
element_energies = _active.element_energies
assemble_values = _active.assemble_values
