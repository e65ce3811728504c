"""Backend selection for the compiled kernels.

Set ``VOLJUMP_DISABLE_NUMBA=1`` to force the pure-numpy code path.  The flag
is read once at import time.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

_FALSE_VALUES = {"", "0", "false", "no", "off"}

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return decorator


NUMBA_DISABLED = os.environ.get("VOLJUMP_DISABLE_NUMBA", "").strip().lower() not in _FALSE_VALUES
USE_NUMBA = HAS_NUMBA and not NUMBA_DISABLED

if NUMBA_DISABLED:
    logger.debug("numba disabled via VOLJUMP_DISABLE_NUMBA")


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
