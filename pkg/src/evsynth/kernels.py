"""Kernel lane selection.

The compiled extension is preferred when importable; the pure-Python lane is
the fallback and is also forced by setting EVSYNTH_DISABLE_EXT=1.  Both lanes
implement the same kernel contract and produce bit-identical output.
"""

import os

from . import _pykernels

if os.environ.get("EVSYNTH_DISABLE_EXT", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

backend_name: str = _impl.LANE

NO_EVENT_T = _pykernels.NO_EVENT_T

ideal_interval = _impl.ideal_interval
voltmeter_interval = _impl.voltmeter_interval
fp_samples = _impl.fp_samples
rng_uniforms = _impl.rng_uniforms


def available_lanes() -> dict:
    """Importable kernel modules keyed by lane name."""
    lanes = {_pykernels.LANE: _pykernels}
    try:
        from . import _core

        lanes[_core.LANE] = _core
    except ImportError:
        pass
    return lanes
