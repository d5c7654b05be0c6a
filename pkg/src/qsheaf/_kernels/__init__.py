"""Enumeration kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it was built and ``QSHEAF_PURE_PYTHON``
is not set.  ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels as py

if os.environ.get("QSHEAF_PURE_PYTHON"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

BACKEND = "cython" if compiled is not None else "python"


def downsets(down, flat=None, limit=1 << 62):
    if compiled is not None and len(down) <= 64:
        return compiled.downsets(list(down), None if flat is None else list(flat), limit)
    return py.downsets(list(down), None if flat is None else list(flat), limit)


def sections(sizes, order, up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off, tab,
             limit=1 << 62, collect=True):
    impl = compiled if compiled is not None else py
    return impl.sections(sizes, order, up_ptr, up_ctx, up_off, dn_ptr, dn_ctx, dn_off,
                         tab, limit, collect)


def hyper_families(full, active, up_ptr, up_ctx, up_off, tab, limit=1 << 62):
    impl = compiled if compiled is not None else py
    return impl.hyper_families(full, active, up_ptr, up_ctx, up_off, tab, limit)


__all__ = ["BACKEND", "downsets", "sections", "hyper_families", "py", "compiled"]
