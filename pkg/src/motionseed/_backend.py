"""Kernel selection.

The compiled extension is used when importable; setting
``MOTIONSEED_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback

if os.environ.get("MOTIONSEED_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        NAME = "compiled"
    except ImportError:
        kernels = _fallback
        NAME = "python"


def available():
    """Names of the kernel sets importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get(name=None):
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def thread_count():
    """Worker cap from ``S2M_THREADS`` (default 1)."""
    raw = os.environ.get("S2M_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
