"""Backend dispatch for the dynamic-programming kernels.

The hot kernels (interface sweep and block-pair ensemble) come from the
compiled extension when it is available; everything else stays in NumPy.
Set COPOLEM_KERNELS=python to force the pure fallback everywhere (useful
for debugging and for the backend parity tests) or COPOLEM_KERNELS=cython
to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCE = os.environ.get("COPOLEM_KERNELS", "").strip().lower()

if _FORCE in ("", "c", "cython", "compiled"):
    try:
        from . import _kernels_cy as _hot  # type: ignore[attr-defined]
    except ImportError:
        if _FORCE:
            raise ImportError(
                "COPOLEM_KERNELS requested the compiled backend but the "
                "extension is not built"
            )
        _hot = _kernels_py
elif _FORCE == "python":
    _hot = _kernels_py
else:
    raise ValueError(f"unknown COPOLEM_KERNELS value: {_FORCE!r}")

BACKEND = _hot.BACKEND_NAME

# hot paths: per-step inner loops dominate the table builds
interface_span_logz = _hot.interface_span_logz
pair_ensemble_logz = _hot.pair_ensemble_logz

# cold paths: exact big-integer counts and a one-shot percolation scan
crossing_counts = _kernels_py.crossing_counts
lpp_max_crossed = _kernels_py.lpp_max_crossed


def backend_name() -> str:
    """Name of the kernel backend in use ("cython" or "python")."""
    return BACKEND
