"""Kernel backend selection.

The hot kernels (velocity net forward pass, exact divergence, residual
loss gradient) exist twice: a numba ``@njit`` implementation and a pure
numpy reference.  The active backend is chosen once at import time from
the ``LFIS_BACKEND`` environment variable:

* unset or ``auto`` -- numba when importable, numpy otherwise
* ``numba``         -- require numba, raise if missing
* ``numpy``         -- force the reference implementation

``benchmarks/bench_backends.py`` times the two against each other.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import numpy_kernels

_choice = os.environ.get("LFIS_BACKEND", "auto").strip().lower() or "auto"

if _choice == "numpy":
    kernels = numpy_kernels
    BACKEND = "numpy"
elif _choice in ("auto", "numba"):
    try:
        from . import numba_kernels

        kernels = numba_kernels
        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise ConfigError("LFIS_BACKEND=numba but numba is not importable")
        kernels = numpy_kernels
        BACKEND = "numpy"
else:
    raise ConfigError(
        f"LFIS_BACKEND must be 'auto', 'numba', or 'numpy', got {_choice!r}"
    )

forward = kernels.forward
forward_div = kernels.forward_div
loss_and_grad = kernels.loss_and_grad
