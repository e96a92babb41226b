# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Three kernels sit on the hot paths of the package: the cyclic Jacobi
eigensolver behind every Hermitian eigendecomposition, the Schur-complement
assembly of the interior-point solver, and the per-shot inverse-CDF sampling
of the protocol simulators.  ``_pykernels`` holds drop-in equivalents.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def jacobi_eigh(a, double tol=1e-15, int max_sweeps=60):
    """Cyclic Jacobi on a real symmetric matrix.

    Returns ``(w, v, sweeps)`` with unsorted eigenvalues ``w`` and
    eigenvectors in the columns of ``v``; ``sweeps`` is -1 when the sweep
    budget ran out before the off-diagonal mass fell below
    ``tol * ||a||_F``.
    """
    cdef double[:, ::1] A = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] V = v_arr
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, total, apq, theta, t, c, s, akp, akq, thresh
    total = 0.0
    for p in range(n):
        for q in range(n):
            total += A[p, q] * A[p, q]
    thresh = tol * sqrt(total)
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        if sqrt(2.0 * off) <= thresh:
            return np.array([A[k, k] for k in range(n)]), v_arr, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = A[p, k]
                    akq = A[q, k]
                    A[p, k] = c * akp - s * akq
                    A[q, k] = s * akp + c * akq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    akp = V[k, p]
                    akq = V[k, q]
                    V[k, p] = c * akp - s * akq
                    V[k, q] = s * akp + c * akq
    return np.array([A[k, k] for k in range(n)]), v_arr, -1


def schur_block(cnp.int64_t[::1] indptr, cnp.int64_t[::1] rows,
                cnp.int64_t[::1] cols, double[::1] vals,
                double[:, ::1] X, double[:, ::1] Sinv, double[:, ::1] M):
    """Add ``tr(A_i X A_j Sinv)`` for one block into ``M`` (in place).

    Constraint ``i`` owns the COO entries ``indptr[i]:indptr[i+1]``; every
    stored matrix lists both triangles explicitly.
    """
    cdef Py_ssize_t m = indptr.shape[0] - 1
    cdef Py_ssize_t i, j, e, f
    cdef cnp.int64_t pe, qe
    cdef double ve, acc
    for i in range(m):
        if indptr[i] == indptr[i + 1]:
            continue
        for j in range(i, m):
            if indptr[j] == indptr[j + 1]:
                continue
            acc = 0.0
            for e in range(indptr[i], indptr[i + 1]):
                pe = rows[e]
                qe = cols[e]
                ve = vals[e]
                for f in range(indptr[j], indptr[j + 1]):
                    acc += ve * vals[f] * X[qe, rows[f]] * Sinv[cols[f], pe]
            M[i, j] += acc
            if j != i:
                M[j, i] += acc


cdef inline Py_ssize_t _search(const double[::1] cdf, Py_ssize_t n, double u) nogil:
    cdef Py_ssize_t k
    for k in range(n):
        if u < cdf[k]:
            return k
    return n - 1


def sample_tree(const double[:, ::1] u, const double[::1] cdf1,
                const double[:, ::1] cdf2, const double[:, :, ::1] cdf3,
                const cnp.int64_t[::1] n2, const cnp.int64_t[:, ::1] n3):
    """Three-stage inverse-CDF sampling, one row of ``u`` per shot."""
    cdef Py_ssize_t shots = u.shape[0]
    cdef Py_ssize_t n1 = cdf1.shape[0]
    out_arr = np.empty((shots, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef Py_ssize_t r, a, b
    with nogil:
        for r in range(shots):
            a = _search(cdf1, n1, u[r, 0])
            b = _search(cdf2[a], n2[a], u[r, 1])
            out[r, 0] = a
            out[r, 1] = b
            out[r, 2] = _search(cdf3[a, b], n3[a, b], u[r, 2])
    return out_arr
