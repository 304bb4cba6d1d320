# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assembly kernels.

Hot inner loops of the Schur-complement assembly and the constraint maps:
sparse gathers, quadratic forms and the entrywise sandwich products that
dominate solver runtime.  Contracts mirror ``sdsolve._kernels_py``.
"""

from libc.stdint cimport int64_t

import numpy as np
cimport numpy as cnp

cnp.import_array()


def gather_inner_all(double[:, ::1] B, int64_t[:] rows, int64_t[:] cols,
                     double[:] vals, int64_t[:] offs, double[:] out):
    cdef Py_ssize_t i, t, m = offs.shape[0] - 1
    cdef int64_t r, c
    cdef double acc
    for i in range(m):
        acc = 0.0
        for t in range(offs[i], offs[i + 1]):
            r = rows[t]
            c = cols[t]
            if r == c:
                acc += vals[t] * B[r, c]
            else:
                acc += 2.0 * vals[t] * B[r, c]
        out[i] = acc


def adjoint_accum(double[:, ::1] out, int64_t[:] rows, int64_t[:] cols,
                  double[:] vals, int64_t[:] offs, double[:] y):
    cdef Py_ssize_t i, t, m = offs.shape[0] - 1
    cdef int64_t r, c
    cdef double w, v
    for i in range(m):
        w = y[i]
        if w == 0.0:
            continue
        for t in range(offs[i], offs[i + 1]):
            r = rows[t]
            c = cols[t]
            v = w * vals[t]
            out[r, c] += v
            if r != c:
                out[c, r] += v


def scatter_add(double[:, ::1] out, int64_t[:] rows, int64_t[:] cols,
                double[:] vals, double scale):
    cdef Py_ssize_t t, nnz = vals.shape[0]
    cdef int64_t r, c
    cdef double v
    for t in range(nnz):
        r = rows[t]
        c = cols[t]
        v = scale * vals[t]
        out[r, c] += v
        if r != c:
            out[c, r] += v


def inner_into(double[:, ::1] B, int64_t[:] rows, int64_t[:] cols,
               double[:] vals, int64_t[:] offs, int64_t[:] idx,
               double[:] out, double scale):
    cdef Py_ssize_t p, t, nsel = idx.shape[0]
    cdef int64_t j, r, c
    cdef double acc
    for p in range(nsel):
        j = idx[p]
        acc = 0.0
        for t in range(offs[j], offs[j + 1]):
            r = rows[t]
            c = cols[t]
            if r == c:
                acc += vals[t] * B[r, c]
            else:
                acc += 2.0 * vals[t] * B[r, c]
        out[j] += scale * acc


def quad_into(double[:, ::1] V, double[:] lam, int64_t[:] rows, int64_t[:] cols,
              double[:] vals, int64_t[:] offs, int64_t[:] idx,
              double[:] out, double scale):
    cdef Py_ssize_t p, t, r, nsel = idx.shape[0], rank = lam.shape[0]
    cdef int64_t j, a, bb
    cdef double acc, g
    for p in range(nsel):
        j = idx[p]
        acc = 0.0
        for t in range(offs[j], offs[j + 1]):
            a = rows[t]
            bb = cols[t]
            g = 0.0
            for r in range(rank):
                g += lam[r] * V[r, a] * V[r, bb]
            if a == bb:
                acc += vals[t] * g
            else:
                acc += 2.0 * vals[t] * g
        out[j] += scale * acc


def m4_into(double[:, ::1] Bleft, double[:, ::1] Sinv, int64_t[:] rows,
            int64_t[:] cols, double[:] vals, int64_t[:] offs, int64_t[:] idx,
            double[:] out, double scale):
    cdef Py_ssize_t p, t, k, n = Sinv.shape[0], nsel = idx.shape[0]
    cdef int64_t j, r, c
    cdef double acc, dot
    for p in range(nsel):
        j = idx[p]
        acc = 0.0
        for t in range(offs[j], offs[j + 1]):
            r = rows[t]
            c = cols[t]
            dot = 0.0
            for k in range(n):
                dot += Bleft[r, k] * Sinv[k, c]
            if r == c:
                acc += vals[t] * dot
            else:
                acc += 2.0 * vals[t] * dot
        out[j] += scale * acc


def m5_into(double[:, ::1] Sinv, int64_t[:] ri, int64_t[:] ci, double[:] vi,
            int64_t[:] rows, int64_t[:] cols, double[:] vals, int64_t[:] offs,
            int64_t[:] idx, double[:] out, double scale):
    cdef Py_ssize_t p, t, u, nsel = idx.shape[0], nnz_i = vi.shape[0]
    cdef int64_t j, r, c, a, bb
    cdef double acc, cell
    for p in range(nsel):
        j = idx[p]
        acc = 0.0
        for t in range(offs[j], offs[j + 1]):
            r = rows[t]
            c = cols[t]
            cell = 0.0
            for u in range(nnz_i):
                a = ri[u]
                bb = ci[u]
                if a == bb:
                    cell += vi[u] * Sinv[r, a] * Sinv[bb, c]
                else:
                    cell += vi[u] * (Sinv[r, a] * Sinv[bb, c]
                                     + Sinv[r, bb] * Sinv[a, c])
            if r == c:
                acc += vals[t] * cell
            else:
                acc += 2.0 * vals[t] * cell
        out[j] += scale * acc
