"""Slot-loop kernel with backend selection at import.

The compiled extension is used when it was built; otherwise the pure-Python
loop is used. Set ``QKDLAB_BACKEND=python`` to force the fallback.
"""
import os

from . import _slots_py

BACKEND = "python"
simulate_slots = _slots_py.simulate_slots

if os.environ.get("QKDLAB_BACKEND", "").lower() != "python":
    try:
        from . import _slots_cy
    except ImportError:  # extension not built
        _slots_cy = None
    else:
        simulate_slots = _slots_cy.simulate_slots
        BACKEND = "cython"


def get_kernel(name=None):
    """Return the kernel for ``name`` ("python" / "cython"), default active."""
    if name is None:
        return simulate_slots
    if name == "python":
        return _slots_py.simulate_slots
    if name == "cython":
        from . import _slots_cy as mod
        return mod.simulate_slots
    raise ValueError(f"unknown kernel backend {name!r}")
