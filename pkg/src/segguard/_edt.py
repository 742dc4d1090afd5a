"""Distance-transform kernel selection: compiled if available, else pure Python."""

import numpy as np

try:
    from segguard._edt_kernel import edt_sq_inplace as _edt_sq_inplace

    KERNEL = "compiled"
except ImportError:  # pragma: no cover - exercised only without the extension
    from segguard._edt_py import edt_sq_inplace as _edt_sq_inplace

    KERNEL = "python"


def edt_from_sites(sites: np.ndarray, spacing) -> np.ndarray:
    """Exact mm distance from every voxel to the nearest True voxel of sites."""
    sites = np.asarray(sites, dtype=bool)
    if sites.ndim != 3:
        raise ValueError("sites must be a 3-d boolean array")
    d = np.where(sites, 0.0, np.inf)
    d = np.ascontiguousarray(d, dtype=np.float64)
    s0, s1, s2 = (float(s) for s in spacing)
    _edt_sq_inplace(d, s0, s1, s2)
    return np.sqrt(d)
