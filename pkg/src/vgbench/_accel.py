"""Kernel backend selection.

Hot loops (rasterization, texture evaluation and the random convolution of
network randomization) exist twice: a loop form compiled with numba and a
vectorized numpy form. Set ``VGBENCH_NUMBA=0`` to force the numpy path; it is also used automatically
when numba cannot be imported. Both paths are required to produce
bit-identical output, so kernels restrict themselves to + - * /, sqrt, floor
and comparisons. Anything transcendental is precomputed by the caller.
"""

import os

_FLAG = os.environ.get("VGBENCH_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(func):
    """Compile ``func`` with numba when available (cached, no fastmath).

    Without numba the plain Python function is returned, which is only
    useful for tiny inputs; callers pick the numpy path via ``USE_NUMBA``.
    """
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
