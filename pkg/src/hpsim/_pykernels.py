"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same results up to floating-point rounding.  Used when the
extension is not built or when ``HPSIM_BACKEND=python`` is set.
"""
import numpy as np


def jacobi_eigh(a, tol=1e-15, max_sweeps=60):
    A = np.array(a, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    thresh = tol * np.sqrt(np.sum(A * A))
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        if np.sqrt(2.0 * np.sum(A[iu] ** 2)) <= thresh:
            return np.diag(A).copy(), V, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V, -1


def schur_block(indptr, rows, cols, vals, X, Sinv, M):
    m = len(indptr) - 1
    n = X.shape[0]
    counts = np.diff(indptr)
    owner = np.repeat(np.arange(m), counts)
    # T_i = A_i Sinv, stacked; then G_i = X T_i
    T = np.zeros((m, n, n))
    np.add.at(T, (owner, rows), vals[:, None] * Sinv[cols])
    G = np.matmul(X, T)
    contrib = G[:, rows, cols] * vals  # (m, nnz): entry f of A_j against G_i
    out = np.zeros((m, m))
    np.add.at(out.T, owner, contrib.T)
    M += out


def sample_tree(u, cdf1, cdf2, cdf3, n2, n3):
    # first k with u < cdf[k] == number of cdf entries <= u; padding is +inf
    a = np.minimum(np.sum(cdf1[None, :] <= u[:, 0:1], axis=1), len(cdf1) - 1)
    b = np.minimum(np.sum(cdf2[a] <= u[:, 1:2], axis=1), n2[a] - 1)
    c = np.minimum(np.sum(cdf3[a, b] <= u[:, 2:3], axis=1), n3[a, b] - 1)
    return np.stack([a, b, c], axis=1).astype(np.int64)
