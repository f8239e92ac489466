"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports; otherwise the numpy
fallback.  Set ``BEAMSCATTER_PURE_PYTHON=1`` to force the fallback.  The two
backends agree to a few ulp but are not bit-identical, so determinism holds
per backend.
"""

import os

if os.environ.get("BEAMSCATTER_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"

nonlinear_kick = _impl.nonlinear_kick
linear_rotate = _impl.linear_rotate
power_sum = _impl.power_sum

__all__ = ["BACKEND", "nonlinear_kick", "linear_rotate", "power_sum"]
