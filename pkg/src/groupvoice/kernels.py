"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise (or
when ``GROUPVOICE_PURE_PYTHON=1`` is set) the numpy fallback is used.
``BACKEND`` names the active choice.

``fixed_point_terms`` always uses numpy: a matrix-vector product plus a
vectorised ``tanh`` beats the scalar compiled loop (see
``benchmarks/bench_kernels.py``). The compiled version is kept for the
comparison.
"""
import os

from . import _kernels_py

if os.environ.get("GROUPVOICE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

LOGCOSH = _kernels_py.LOGCOSH
GAUSS = _kernels_py.GAUSS

fixed_point_terms = _kernels_py.fixed_point_terms
spread_specific_loudness = _impl.spread_specific_loudness
track_cycle_boundaries = _impl.track_cycle_boundaries
successive_abs_diff = _impl.successive_abs_diff
pq_deviation = _impl.pq_deviation


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
