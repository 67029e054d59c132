"""Kernel selection: the compiled core when importable, else pure Python.

Set ``PDPART_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("PDPART_PURE_PYTHON"):
    _impl = _compiled
    BACKEND = "cython"
else:
    _impl = _fallback
    BACKEND = "python"

crp_path = _impl.crp_path
law_kn_logprob = _impl.law_kn_logprob


def implementation(name):
    """Return the kernel module for ``name`` in {"cython", "python"}."""
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
