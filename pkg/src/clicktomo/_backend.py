"""Numerical backend selection.

The hot EM kernels are compiled with numba when available. Set the
environment variable ``CLICKTOMO_BACKEND`` to ``numpy`` to force the
pure-numpy path, ``numba`` to require the compiled path, or ``auto``
(default) to use numba when importable.
"""

import os

_ENV_VAR = "CLICKTOMO_BACKEND"

try:
    from numba import njit  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda func: func


def _select_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{_ENV_VAR} must be 'auto', 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    if choice == "numba" and not NUMBA_AVAILABLE:
        raise ImportError(f"{_ENV_VAR}=numba but numba is not importable")
    return "numba" if NUMBA_AVAILABLE else "numpy"


BACKEND = _select_backend()
