"""Backend selection for the hot numeric kernels.

The environment variable ``CATMI_BACKEND`` picks the implementation:

* ``auto`` (default) — numba when importable, else the numpy fallback,
* ``numba``          — require the compiled backend, raise if unavailable,
* ``numpy``          — force the pure-numpy fallback.

Both backends expose the same functions and consume caller-supplied
uniforms, so results are reproducible for a fixed seed on either one.
``benchmarks/bench_backends.py`` times the two side by side.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

_choice = os.environ.get("CATMI_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"CATMI_BACKEND must be auto, numba or numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = _kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        _impl = _kernels_numpy
        BACKEND = "numpy"

assign_classes = _impl.assign_classes
draw_missing = _impl.draw_missing
class_level_counts = _impl.class_level_counts
best_split = _impl.best_split
route_rows = _impl.route_rows


def available_backends():
    """Name -> module for every importable backend (used by the benchmark)."""
    out = {"numpy": _kernels_numpy}
    try:
        from . import _kernels_numba

        out["numba"] = _kernels_numba
    except ImportError:
        pass
    return out
