"""Backend dispatch for the hot kernels.

GGCNLAB_BACKEND selects the implementation: "numba" (default when importable)
or "numpy". The active name is exposed as BACKEND.
"""

import os

from . import numpy_backend

_requested = os.environ.get("GGCNLAB_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        "GGCNLAB_BACKEND must be 'numba' or 'numpy', got %r" % _requested
    )

_impl = None
if _requested in ("", "numba"):
    try:
        from . import numba_backend as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = None
if _impl is None:
    _impl = numpy_backend
    BACKEND = "numpy"

edge_cosine = _impl.edge_cosine
edge_cosine_grad = _impl.edge_cosine_grad
edge_aggregate = _impl.edge_aggregate
edge_aggregate_grad = _impl.edge_aggregate_grad
signed_trials_aggregate = _impl.signed_trials_aggregate
edge_messages_aggregate = _impl.edge_messages_aggregate

__all__ = [
    "BACKEND",
    "edge_cosine",
    "edge_cosine_grad",
    "edge_aggregate",
    "edge_aggregate_grad",
    "signed_trials_aggregate",
    "edge_messages_aggregate",
]
