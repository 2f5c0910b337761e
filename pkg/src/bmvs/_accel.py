"""Backend switch for the hot kernels.

Set ``BMVS_DISABLE_NUMBA=1`` to force the pure-numpy fallbacks. The flag is
read once at import time; tests flip it by calling :func:`set_backend`.
"""
import os

_FALSE = {"", "0", "false", "no", "off"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_use_numba = HAVE_NUMBA and os.environ.get("BMVS_DISABLE_NUMBA", "").strip().lower() in _FALSE


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def use_numba():
    return _use_numba


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _use_numba
    prev = backend()
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def backend():
    return "numba" if _use_numba else "numpy"
