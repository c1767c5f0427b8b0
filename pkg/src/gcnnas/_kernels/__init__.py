"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
reference always works. ``GCNNAS_KERNELS=reference|compiled`` forces a
backend (``compiled`` raises if the extension is missing), which is how
the benchmark pits the two against each other.
"""

from __future__ import annotations

import os

from . import ref

try:
    from . import _tconv as _compiled
except ImportError:  # pure-python install
    _compiled = None

_forced = os.environ.get("GCNNAS_KERNELS", "").strip().lower()
if _forced == "reference":
    _active = ref
elif _forced == "compiled":
    if _compiled is None:
        raise ImportError("GCNNAS_KERNELS=compiled but the extension is not built")
    _active = _compiled
else:
    _active = _compiled if _compiled is not None else ref

BACKEND = _active.BACKEND
HAS_COMPILED = _compiled is not None

temporal_conv_fwd = _active.temporal_conv_fwd
temporal_conv_bwd_x = _active.temporal_conv_bwd_x
temporal_conv_bwd_w = _active.temporal_conv_bwd_w


def backends() -> dict:
    """Name -> module for every available backend (for tests/benchmarks)."""
    table = {"reference": ref}
    if _compiled is not None:
        table["compiled"] = _compiled
    return table
