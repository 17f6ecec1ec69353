"""Hot kernels with a compiled backend and a numpy fallback.

The Cython extension is used when it was built; set ``HYEXPAND_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("HYEXPAND_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend

BACKEND = active.BACKEND
hy_sweep = active.hy_sweep
chain_sums = active.chain_sums
mc_batch = active.mc_batch

__all__ = ["BACKEND", "hy_sweep", "chain_sums", "mc_batch",
           "python_backend", "compiled_backend"]
