"""Select the coordinate-descent kernel at import time.

The compiled extension is preferred; the numpy fallback implements the same
contract.  Set UNILASSO_PURE_PYTHON=1 to force the fallback (used by the
benchmark and for debugging).
"""

import os

if os.environ.get("UNILASSO_PURE_PYTHON"):
    from . import _cd_py as _impl
else:
    try:
        from . import _cd_fast as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _cd_py as _impl

cd_solve = _impl.cd_solve
IS_COMPILED = _impl.IS_COMPILED
KERNEL_NAME = "compiled" if IS_COMPILED else "python"
