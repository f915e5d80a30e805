"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy versions in ``_kernels_py`` are used.  Set ``MINPLUS_BACKEND=python``
to force the fallback.  ``MINPLUS_THREADS`` caps the OpenMP thread count of
the compiled kernels.
"""

import os

from . import _kernels_py

_python = _kernels_py
_compiled = None

if os.environ.get("MINPLUS_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_active = _compiled if _compiled is not None else _python


def _threads():
    raw = os.environ.get("MINPLUS_THREADS", "")
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


def backend():
    """Name of the active backend, ``"cython"`` or ``"python"``."""
    return _active.BACKEND


def available_backends():
    return {"python": _python, **({"cython": _compiled} if _compiled is not None else {})}


def use_backend(name):
    """Switch the active backend for this process; returns the previous name."""
    global _active
    choices = available_backends()
    if name not in choices:
        raise ValueError(f"backend {name!r} is not available (have {sorted(choices)})")
    previous, _active = _active.BACKEND, choices[name]
    return previous


def eval_forms(mats, pts):
    return _active.eval_forms(mats, pts, _threads())


def min_stats(mats, pts):
    return _active.min_stats(mats, pts, _threads())


def dp_sweep(values, lo, h, counts, pts, A, a, b, w, wcost, penalty):
    return _active.dp_sweep(values, lo, h, counts, pts, A, a, b, w, wcost, penalty, _threads())
