"""Kernel backend selection.

Hot kernels are compiled with numba when it is importable. Set
``DNACLAB_NUMBA=0`` to force the pure-numpy fallback (useful for debugging
and for comparing the two paths in ``benchmarks/bench_kernels.py``).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

USE_NUMBA = numba is not None and os.environ.get("DNACLAB_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba (cached) or return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)
