"""Random-forest baseline with a compiled extension core.

The split-search and tree-routing kernels come from the Cython module
when it built; otherwise the numpy fallback takes over. Both produce
bit-identical forests. Set SOILMAP_FOREST_BACKEND=python to force the
fallback (benchmarks and parity tests use this).
"""

import os
import warnings

from . import _kernels_py

if os.environ.get("SOILMAP_FOREST_BACKEND", "").lower() == "python":
    kernels = _kernels_py
    _COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
        _COMPILED = True
    except ImportError:
        warnings.warn("compiled forest kernels unavailable; using numpy fallback")
        kernels = _kernels_py
        _COMPILED = False


def backend_name() -> str:
    return "compiled" if _COMPILED else "python"


from .forest import (  # noqa: E402
    RFConfig,
    RandomForest,
    TreeArrays,
    load_forest,
    random_search,
    save_forest,
)
from .features import extract_features  # noqa: E402

__all__ = [
    "RFConfig", "RandomForest", "TreeArrays", "load_forest", "save_forest",
    "random_search", "extract_features", "backend_name", "kernels",
]
