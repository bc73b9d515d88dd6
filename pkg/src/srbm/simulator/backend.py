"""Selects the step-loop kernel at import time.

The compiled extension is preferred; set ``SRBM_PURE_PYTHON=1`` to force
the pure-Python kernel.
"""

import os

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _kernel_py}
if _compiled is not None:
    KERNELS["cython"] = _compiled

DEFAULT = "python" if os.environ.get("SRBM_PURE_PYTHON") or _compiled is None else "cython"


def get_kernel(name: str = "auto"):
    if name == "auto":
        name = DEFAULT
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available (have {sorted(KERNELS)})") from None


def available() -> list[str]:
    return sorted(KERNELS)
