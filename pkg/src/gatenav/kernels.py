"""Selects the compiled environment-step kernel, falling back to pure Python.

Set GATENAV_PURE_PYTHON=1 to force the fallback (used by the kernel
benchmark and by tests that compare both implementations).
"""

import os

from . import _speedups_py

if os.environ.get("GATENAV_PURE_PYTHON"):
    _impl = _speedups_py
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _speedups_py

if getattr(_impl, "ABI_VERSION", None) != _speedups_py.ABI_VERSION:
    raise ImportError(
        "compiled kernel ABI mismatch: rebuild the extension "
        f"(compiled={getattr(_impl, 'ABI_VERSION', None)}, expected={_speedups_py.ABI_VERSION})"
    )

step_batch = _impl.step_batch
COMPILED = bool(getattr(_impl, "COMPILED", False))

# Re-export the ABI constants from the canonical (Python) definition.
N_PARAMS = _speedups_py.N_PARAMS
P_DT = _speedups_py.P_DT
P_TAU_V = _speedups_py.P_TAU_V
P_A_MAX = _speedups_py.P_A_MAX
P_TAU_YAW = _speedups_py.P_TAU_YAW
P_YAW_RATE_MAX = _speedups_py.P_YAW_RATE_MAX
P_YAW_SPEED_EPS = _speedups_py.P_YAW_SPEED_EPS
P_V_LIMIT_XY = _speedups_py.P_V_LIMIT_XY
P_V_LIMIT_Z = _speedups_py.P_V_LIMIT_Z
P_T_MAX = _speedups_py.P_T_MAX
P_SUCCESS_RADIUS = _speedups_py.P_SUCCESS_RADIUS
P_DRONE_RADIUS = _speedups_py.P_DRONE_RADIUS
P_GROUND_Z = _speedups_py.P_GROUND_Z
P_FRAME_OUTER = _speedups_py.P_FRAME_OUTER
P_C_PROXIMITY = _speedups_py.P_C_PROXIMITY
P_C_OBSTACLE = _speedups_py.P_C_OBSTACLE
P_C_COLLISION = _speedups_py.P_C_COLLISION
P_C_VELOCITY = _speedups_py.P_C_VELOCITY
P_R_SAFETY = _speedups_py.P_R_SAFETY

OUT_RUNNING = _speedups_py.OUT_RUNNING
OUT_SUCCESS = _speedups_py.OUT_SUCCESS
OUT_COLLISION = _speedups_py.OUT_COLLISION
OUT_TIMEOUT = _speedups_py.OUT_TIMEOUT
