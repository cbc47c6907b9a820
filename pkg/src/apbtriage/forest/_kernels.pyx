# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Native split search and batch inference.

Mirrors ``_pykernels`` operation for operation so that both backends grow
identical trees: histogram counts are integers and every floating-point
expression is evaluated in the same order.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, calloc, free

cnp.import_array()

cdef double TIE_EPS = 1e-12


cdef inline double _gini(double a, double b) nogil:
    cdef double w = a + b
    cdef double p0 = a / w
    cdef double p1 = b / w
    return 1.0 - p0 * p0 - p1 * p1


def best_split(const cnp.uint8_t[:, ::1] X,
               const cnp.int64_t[::1] rows,
               const cnp.int32_t[::1] mult,
               const cnp.uint8_t[::1] y,
               const cnp.int64_t[::1] feats,
               const cnp.int32_t[::1] nvals,
               double w0, double w1, long min_leaf):
    cdef Py_ssize_t k = feats.shape[0]
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t i, j, v, r, total = 0, pos
    cdef long cnt
    cdef long *offs = <long *> malloc((k + 1) * sizeof(long))
    if offs == NULL:
        raise MemoryError()
    offs[0] = 0
    for j in range(k):
        offs[j + 1] = offs[j] + nvals[feats[j]]
    total = offs[k]

    cdef long *hneg = <long *> calloc(total + 1, sizeof(long))
    cdef long *hpos = <long *> calloc(total + 1, sizeof(long))
    cdef double *dec = <double *> malloc((total + 1) * sizeof(double))
    if hneg == NULL or hpos == NULL or dec == NULL:
        free(offs); free(hneg); free(hpos); free(dec)
        raise MemoryError()

    cdef long n0 = 0, n1 = 0, l0, l1, r0, r1
    cdef double a, b, aL, bL, aR, bR, W, WL, WR, parent, d, best = -1.0
    cdef bint any_valid = False
    cdef long best_j = -1, best_v = -1

    with nogil:
        for i in range(m):
            r = rows[i]
            cnt = mult[r]
            if y[r]:
                n1 += cnt
                for j in range(k):
                    hpos[offs[j] + X[r, feats[j]]] += cnt
            else:
                n0 += cnt
                for j in range(k):
                    hneg[offs[j] + X[r, feats[j]]] += cnt

        a = w0 * <double> n0
        b = w1 * <double> n1
        W = a + b
        parent = _gini(a, b)

        for j in range(k):
            l0 = 0
            l1 = 0
            for v in range(nvals[feats[j]]):
                pos = offs[j] + v
                dec[pos] = -1.0
                l0 += hneg[pos]
                l1 += hpos[pos]
                if hneg[pos] + hpos[pos] == 0:
                    continue
                r0 = n0 - l0
                r1 = n1 - l1
                if l0 + l1 < min_leaf or r0 + r1 < min_leaf:
                    continue
                aL = w0 * <double> l0
                bL = w1 * <double> l1
                aR = w0 * <double> r0
                bR = w1 * <double> r1
                WL = aL + bL
                WR = aR + bR
                d = parent - (WL / W) * _gini(aL, bL) - (WR / W) * _gini(aR, bR)
                dec[pos] = d
                if not any_valid or d > best:
                    best = d
                    any_valid = True

        if any_valid and best > TIE_EPS:
            for j in range(k):
                for v in range(nvals[feats[j]]):
                    pos = offs[j] + v
                    if dec[pos] >= best - TIE_EPS:
                        best_j = j
                        best_v = v
                        break
                if best_j >= 0:
                    break

    if best_j >= 0:
        d = dec[offs[best_j] + best_v]
    free(offs); free(hneg); free(hpos); free(dec)
    if best_j < 0:
        return None
    return int(feats[best_j]), best_v + 0.5, d


def predict_forest(const cnp.uint8_t[:, ::1] X,
                   const cnp.int32_t[::1] feature,
                   const cnp.float64_t[::1] threshold,
                   const cnp.int32_t[::1] left,
                   const cnp.int32_t[::1] right,
                   const cnp.float64_t[::1] value,
                   const cnp.int64_t[::1] roots):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t t_count = roots.shape[0]
    cdef Py_ssize_t i, t
    cdef long node
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] acc = out
    with nogil:
        for t in range(t_count):
            for i in range(n):
                node = roots[t]
                while feature[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                acc[i] += value[node]
        for i in range(n):
            acc[i] = acc[i] / <double> t_count
    return out
