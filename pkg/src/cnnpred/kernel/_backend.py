"""Pick the kernel implementation at import time.

The compiled extension is preferred; set ``CNNPRED_KERNEL=python`` to force the
numpy fallback (used by the benchmark and the backend-equivalence tests).
"""

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels


def _select():
    requested = os.environ.get("CNNPRED_KERNEL", "").strip().lower()
    if requested:
        if requested not in BACKENDS:
            raise ImportError(
                f"CNNPRED_KERNEL={requested!r} unavailable; built backends: {sorted(BACKENDS)}"
            )
        return requested
    return "cython" if "cython" in BACKENDS else "python"


BACKEND = _select()
kernels = BACKENDS[BACKEND]
if BACKEND == "python" and _ckernels is None:
    logger.debug("compiled kernels not built; using numpy fallback")
