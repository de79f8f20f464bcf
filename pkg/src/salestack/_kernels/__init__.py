"""Hot inner loops with a numba path and a pure-numpy fallback.

The backend is chosen once at import time. Set ``SALESTACK_NUMBA=0`` to force
the numpy path; numba is also skipped automatically when it cannot be
imported. Both backends produce bitwise-identical splits.
"""
import os

from . import vec

BACKEND = "numpy"
_jit = None

if os.environ.get("SALESTACK_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        from . import jit as _jit
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        _jit = None


def backend_module(name=None):
    """Return the kernel module for ``name`` ('numba' or 'numpy'), default active."""
    name = name or BACKEND
    if name == "numba":
        if _jit is None:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return _jit
    if name == "numpy":
        return vec
    raise ValueError(f"unknown kernel backend {name!r}")


def gini_scan(*args):
    return backend_module().gini_scan(*args)


def newton_scan(*args):
    return backend_module().newton_scan(*args)


def partition_order(order, seg, new_slot, first_child, new_seg):
    """Regroup presorted rows by child node; rows of leaf parents drop out."""
    return backend_module().partition_order(order, seg, new_slot, first_child, new_seg)


def apply_tree(X, feature, threshold, left, right):
    return backend_module().apply_tree(X, feature, threshold, left, right)
