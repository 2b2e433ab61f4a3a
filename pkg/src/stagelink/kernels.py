"""Kernel backend selection.

The hot per-tick math (quaternion products, slerp, forward kinematics) and
the grid A* live in a compiled Cython extension. When the extension is not
built, or when ``STAGELINK_PURE=1`` is set, the pure-Python twin in
``_kern_py`` is used instead. Both expose the same functions with the same
numeric contracts; ``benchmarks/bench_kernels.py`` compares them.
"""

import os

from . import _kern_py

if os.environ.get("STAGELINK_PURE") == "1":
    _impl = _kern_py
else:
    try:
        from . import _kern_c as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kern_py

IDENTITY_QUAT = _kern_py.IDENTITY_QUAT

quat_normalize = _impl.quat_normalize
quat_mul = _impl.quat_mul
quat_conjugate = _impl.quat_conjugate
quat_rotate = _impl.quat_rotate
quat_slerp = _impl.quat_slerp
quat_mul_batch = _impl.quat_mul_batch
quat_normalize_batch = _impl.quat_normalize_batch
slerp_batch = _impl.slerp_batch
fk = _impl.fk
astar_grid = _impl.astar_grid

# The debug admissibility check only exists in the pure backend.
astar_grid_debug = _kern_py.astar_grid


def backend_name() -> str:
    return "native" if _impl.__name__.endswith("_kern_c") else "pure"
