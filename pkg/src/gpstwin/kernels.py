"""Kernel backend selection.

The compiled extension is used when it imports; setting
``GPSTWIN_PURE_PYTHON=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _purepy

BACKEND = "python"
_impl = _purepy

if os.environ.get("GPSTWIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

synth_accumulate = _impl.synth_accumulate
correlate_epl = _impl.correlate_epl


def backends():
    """Both implementations available in this process, keyed by name."""
    out = {"python": _purepy}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
