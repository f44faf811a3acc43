"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting ``STABLAB_PURE_PYTHON=1``
forces the numpy fallback. Both backends expose the same four functions.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("STABLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

sas_transform = _impl.sas_transform
rows_norm = _impl.rows_norm
cumsum_norm = _impl.cumsum_norm
block_max_sum = _impl.block_max_sum


def get_backend(name=None):
    """Return the kernel module for ``name`` ('python' or 'cython'), default active."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
