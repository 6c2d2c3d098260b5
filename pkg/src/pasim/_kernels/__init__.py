"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is optional: if it failed to build (or the
PASIM_BACKEND=python environment variable forces the fallback), the numpy
reference implementations are used instead. Both produce the same results
to floating-point round-off; ties resolve identically.
"""

import os

from . import _ref

_forced = os.environ.get("PASIM_BACKEND", "").lower()

if _forced == "python":
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise ImportError(
                "PASIM_BACKEND=compiled but the compiled kernels are not built"
            )
        _impl = _ref
        BACKEND = "python"

nl_phase_rotate = _impl.nl_phase_rotate
bps_best_angle = _impl.bps_best_angle
unwrap_track = _impl.unwrap_track
