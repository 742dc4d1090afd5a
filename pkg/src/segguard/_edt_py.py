"""Pure-Python fallback for the squared distance transform kernel.

Same lower-envelope algorithm as the compiled kernel, same results to
the bit; used when the extension module is unavailable.
"""

import numpy as np

_INF = float("inf")


def _pass_1d(f, s):
    n = len(f)
    out = [0.0] * n
    fv = [0.0] * n
    xv = [0.0] * n
    z = [0.0] * (n + 1)
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == _INF:
            continue
        xq = q * s
        sec = 0.0
        while k >= 0:
            sec = (fq + xq * xq - (fv[k] + xv[k] * xv[k])) / (2.0 * xq - 2.0 * xv[k])
            if sec <= z[k]:
                k -= 1
            else:
                break
        k += 1
        fv[k] = fq
        xv[k] = xq
        z[k] = -_INF if k == 0 else sec
        z[k + 1] = _INF
    if k < 0:
        return [_INF] * n
    j = 0
    for q in range(n):
        xq = q * s
        while z[j + 1] < xq:
            j += 1
        dx = xq - xv[j]
        out[q] = dx * dx + fv[j]
    return out


def edt_sq_inplace(d: np.ndarray, s0: float, s1: float, s2: float) -> None:
    """Replace d (squared distances, +inf where unknown) by the exact EDT**2."""
    for axis, s in ((0, s0), (1, s1), (2, s2)):
        moved = np.moveaxis(d, axis, -1)  # view into d
        flat = np.ascontiguousarray(moved).reshape(-1, moved.shape[-1])
        for row in range(flat.shape[0]):
            flat[row, :] = _pass_1d(flat[row, :].tolist(), s)
        moved[...] = flat.reshape(moved.shape)
