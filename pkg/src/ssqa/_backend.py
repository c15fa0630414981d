"""Kernel backend selection.

The compiled extension is used when importable.  Setting ``SSQA_BACKEND=python``
forces the pure-Python fallback.
"""

import os

if os.environ.get("SSQA_BACKEND", "").lower() == "python":
    from . import _pycore as core
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        from . import _pycore as core

BACKEND = core.BACKEND


def get_core(name=None):
    """Return the kernel module for ``name`` ('cython', 'python') or the default."""
    if name is None:
        return core
    if name == "python":
        from . import _pycore

        return _pycore
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
