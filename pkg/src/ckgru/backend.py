"""Selects the recurrence-kernel implementation at import time.

The compiled extension (ckgru._cell_cy) is used when it is importable;
otherwise the pure-NumPy twin takes over.  Set CKGRU_KERNEL=python or
CKGRU_KERNEL=compiled to force one side (``compiled`` raises if the
extension is missing).  Both kernels implement the same arithmetic; they
may differ in the last couple of ulps because summation order differs.
"""

import os

_choice = os.environ.get("CKGRU_KERNEL", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"CKGRU_KERNEL must be auto, compiled or python, got {_choice!r}")

if _choice == "python":
    from . import _cell_py as _impl

    KERNEL = "python"
else:
    try:
        from . import _cell_cy as _impl

        KERNEL = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _cell_py as _impl

        KERNEL = "python"

seq_forward = _impl.seq_forward
seq_backward = _impl.seq_backward
