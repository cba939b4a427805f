"""Backend selection: compiled extension if importable, numpy fallback otherwise.

Set ``RAKIKIT_BACKEND=python`` to force the fallback, ``RAKIKIT_BACKEND=ext``
to require the extension (raises if it cannot be imported).
"""

from __future__ import annotations

import os

_requested = os.environ.get("RAKIKIT_BACKEND", "auto").lower()

if _requested in ("py", "python", "fallback"):
    from . import _kernels_py as kernels
elif _requested == "ext":
    from . import _kernels as kernels  # type: ignore[no-redef]
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

BACKEND = kernels.BACKEND_NAME

im2col = kernels.im2col
gather_windows = kernels.gather_windows
row_windows = kernels.row_windows
row_windows_out = kernels.row_windows_out
row_windows_adjoint = kernels.row_windows_adjoint
row_windows_adjoint_out = kernels.row_windows_adjoint_out
cleaky_forward = kernels.cleaky_forward
cleaky_forward_out = kernels.cleaky_forward_out
cleaky_backward = kernels.cleaky_backward
cleaky_backward_inplace = kernels.cleaky_backward_inplace
