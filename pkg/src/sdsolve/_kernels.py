"""Kernel dispatch: compiled extension if available, numpy fallback otherwise.

Set ``SDSOLVE_PURE_PYTHON=1`` to force the fallback (used by the kernel
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

_force_pure = os.environ.get("SDSOLVE_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    from . import _kernels_py as _impl

    HAVE_COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        from . import _kernels_py as _impl

        HAVE_COMPILED = False

gather_inner_all = _impl.gather_inner_all
adjoint_accum = _impl.adjoint_accum
scatter_add = _impl.scatter_add
inner_into = _impl.inner_into
quad_into = _impl.quad_into
m4_into = _impl.m4_into
m5_into = _impl.m5_into


def backend() -> str:
    return "compiled" if HAVE_COMPILED else "pure-python"
