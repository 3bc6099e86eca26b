"""Process-wide runtime knobs.

QDSLAB_THREADS caps the FFT worker count used by the spectral kernels.  The
default of 1 keeps runs strictly sequential; any value only splits batched
transforms across workers and never changes results.
"""

from __future__ import annotations

import os

_ENV_VAR = "QDSLAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{_ENV_VAR} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"{_ENV_VAR} must be a positive integer, got {value}")
    return value
