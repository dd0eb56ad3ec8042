"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy mirror.
Setting ``GIBBSFRAG_PURE=1`` forces the numpy path.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "numpy"
_impl = _kernels_py
if os.environ.get("GIBBSFRAG_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def backend_module(name=None):
    """Return the kernel module for ``name`` ('cython', 'numpy' or None = active)."""
    if name is None:
        return _impl
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def ml_pdf_zolo(alpha, s, x, w, backend=None):
    mod = backend_module(backend)
    return mod.ml_pdf_zolo(float(alpha), np.ascontiguousarray(s, dtype=float),
                           np.ascontiguousarray(x), np.ascontiguousarray(w))


def ml_sf_zolo(alpha, s, x, w, backend=None):
    mod = backend_module(backend)
    return mod.ml_sf_zolo(float(alpha), np.ascontiguousarray(s, dtype=float),
                          np.ascontiguousarray(x), np.ascontiguousarray(w))


def gibbs_sample(V, alpha, table_idx, groups, unif, backend=None):
    """Seat ``unif.shape[1]`` items for each row of ``unif``; see ``_kernels.pyx``."""
    mod = backend_module(backend)
    V = np.ascontiguousarray(V, dtype=float)
    if V.ndim == 2:
        V = V[None]
    unif = np.ascontiguousarray(unif, dtype=float)
    table_idx = np.ascontiguousarray(np.atleast_1d(table_idx), dtype=np.int64)
    groups = np.ascontiguousarray(np.atleast_2d(groups), dtype=np.int64)
    return mod.gibbs_sample(V, float(alpha), table_idx, groups, unif)
