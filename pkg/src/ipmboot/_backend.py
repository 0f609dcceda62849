"""Selects the compiled kernel when it is importable.

Set ``IPMBOOT_PURE_PYTHON=1`` to force the NumPy fallback.
"""

from __future__ import annotations

import os

from .errors import InvalidArgumentError

_kernels = None
if os.environ.get("IPMBOOT_PURE_PYTHON", "").strip() in ("", "0"):
    try:
        from . import _kernels  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        _kernels = None

HAVE_KERNEL = _kernels is not None

# status codes shared by both backends
PARAM = 0
SSE = 1
MAX_ITER = 2
SINGULAR = 3
DAMPING = 4
BAD_START = 5


def resolve(backend: str) -> bool:
    """True when `backend` selects the compiled kernel."""
    if backend == "auto":
        return HAVE_KERNEL
    if backend == "compiled":
        if not HAVE_KERNEL:
            raise InvalidArgumentError("compiled kernel is not available in this build")
        return True
    if backend == "python":
        return False
    raise InvalidArgumentError(f"backend must be 'auto', 'python' or 'compiled', got {backend!r}")


def default_threads() -> int:
    """Thread count from ``IPMBOOT_THREADS`` (default 1)."""
    raw = os.environ.get("IPMBOOT_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"IPMBOOT_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)
