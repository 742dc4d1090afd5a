# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exact separable squared Euclidean distance transform (3D).

One lower-envelope pass per axis over squared distances; voxel positions
are index * spacing so anisotropic grids stay exact. Lines with no
finite entry stay +inf and are resolved by the remaining passes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport free, malloc

cnp.import_array()


cdef void _pass_1d(double* f, double* out, double* fv, double* xv, double* z,
                   Py_ssize_t n, double s) noexcept nogil:
    cdef Py_ssize_t q, j
    cdef Py_ssize_t k = -1
    cdef double fq, xq, sec, dx
    for q in range(n):
        fq = f[q]
        if fq == INFINITY:
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
        z[k] = -INFINITY if k == 0 else sec
        z[k + 1] = INFINITY
    if k < 0:
        for q in range(n):
            out[q] = INFINITY
        return
    j = 0
    for q in range(n):
        xq = q * s
        while z[j + 1] < xq:
            j += 1
        dx = xq - xv[j]
        out[q] = dx * dx + fv[j]


def edt_sq_inplace(double[:, :, ::1] d, double s0, double s1, double s2):
    """Replace d (squared distances, +inf where unknown) by the exact EDT**2."""
    cdef Py_ssize_t n0 = d.shape[0], n1 = d.shape[1], n2 = d.shape[2]
    cdef Py_ssize_t nmax = n0
    if n1 > nmax:
        nmax = n1
    if n2 > nmax:
        nmax = n2
    cdef double* line = <double*> malloc(nmax * sizeof(double))
    cdef double* out = <double*> malloc(nmax * sizeof(double))
    cdef double* fv = <double*> malloc(nmax * sizeof(double))
    cdef double* xv = <double*> malloc(nmax * sizeof(double))
    cdef double* z = <double*> malloc((nmax + 1) * sizeof(double))
    if line == NULL or out == NULL or fv == NULL or xv == NULL or z == NULL:
        free(line); free(out); free(fv); free(xv); free(z)
        raise MemoryError()
    cdef Py_ssize_t i, j, k
    with nogil:
        # axis 0
        for j in range(n1):
            for k in range(n2):
                for i in range(n0):
                    line[i] = d[i, j, k]
                _pass_1d(line, out, fv, xv, z, n0, s0)
                for i in range(n0):
                    d[i, j, k] = out[i]
        # axis 1
        for i in range(n0):
            for k in range(n2):
                for j in range(n1):
                    line[j] = d[i, j, k]
                _pass_1d(line, out, fv, xv, z, n1, s1)
                for j in range(n1):
                    d[i, j, k] = out[j]
        # axis 2
        for i in range(n0):
            for j in range(n1):
                _pass_1d(&d[i, j, 0], out, fv, xv, z, n2, s2)
                for k in range(n2):
                    d[i, j, k] = out[k]
    free(line); free(out); free(fv); free(xv); free(z)
