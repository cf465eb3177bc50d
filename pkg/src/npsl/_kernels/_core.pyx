# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: truncated Legendre-sum matrix.

sum_{n=0}^{L} P_n(c) for every entry of a cosine matrix, via the
three-term recurrence.  This is the O(L * N^2) inner loop of the
singular product quadrature.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def legendre_sum(cnp.ndarray[cnp.float64_t, ndim=2] cosgamma, int degree):
    cdef Py_ssize_t nrow = cosgamma.shape[0]
    cdef Py_ssize_t ncol = cosgamma.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nrow, ncol))
    cdef double c, pkm1, pk, pnext, acc
    cdef Py_ssize_t i, j
    cdef int n
    for i in range(nrow):
        for j in range(ncol):
            c = cosgamma[i, j]
            pkm1 = 1.0
            acc = 1.0
            if degree >= 1:
                pk = c
                acc += c
                for n in range(1, degree):
                    pnext = ((2 * n + 1) * c * pk - n * pkm1) / (n + 1)
                    acc += pnext
                    pkm1 = pk
                    pk = pnext
            out[i, j] = acc
    return out
