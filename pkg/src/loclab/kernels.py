"""Backend selection for the hot kernels.

The compiled extension is used when it imported cleanly; set
``LOCLAB_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from loclab import _fallback

fallback = _fallback

if os.environ.get("LOCLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from loclab import _kernels as _impl
    except ImportError:
        _impl = _fallback

compiled = _impl if _impl is not _fallback else None
BACKEND: str = _impl.BACKEND
drift_paths = _impl.drift_paths
component_means = _impl.component_means
jacobi_sweeps = _impl.jacobi_sweeps
