"""Dense complex-matrix primitives.

Matrices are plain ``numpy`` complex arrays.  Bipartite operators use a
fixed index convention: subsystem A is the slow index, so the basis state
``(i_a, i_b)`` sits at ``i_a * dim_b + i_b`` (``numpy.kron`` order).
"""
from typing import NamedTuple

import numpy as np

from hpsim._backend import kernels
from hpsim.errors import DimensionMismatch, NoConvergence, NotHermitian
from hpsim.settings import DEFAULT

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class EigDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # orthonormal columns


def as_cmatrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermitian_defect(a) -> float:
    """Relative anti-Hermitian part ||a - a^dag||_F / max(1, ||a||_F)."""
    return float(np.linalg.norm(a - a.conj().T) / max(1.0, np.linalg.norm(a)))


def _require_hermitian(a, tol):
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"matrix is not square: {a.shape}")
    if np.linalg.norm(a - a.conj().T) > tol * max(np.linalg.norm(a), 1.0):
        raise NotHermitian(f"matrix is not Hermitian (defect {hermitian_defect(a):.3e})")
    return a


def embed_hermitian(h) -> np.ndarray:
    """Real symmetric image ``[[A, -B], [B, A]]`` of ``H = A + iB``."""
    h = as_cmatrix(h)
    a, b = h.real, h.imag
    return np.block([[a, -b], [b, a]])


def eig_hermitian(a, tol: float = DEFAULT.eig_tol) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Runs cyclic Jacobi on the real symmetric embedding, whose spectrum is the
    Hermitian spectrum with every eigenvalue doubled, then folds each
    eigenvalue cluster back to the complex space with pivoted Gram-Schmidt.
    """
    a = _require_hermitian(a, tol)
    d = a.shape[0]
    if d == 0:
        return EigDecomposition(np.zeros(0), np.zeros((0, 0), dtype=complex))
    h = 0.5 * (a + a.conj().T)
    w, v, sweeps = kernels.jacobi_eigh(embed_hermitian(h))
    if sweeps < 0:
        raise NoConvergence(f"Jacobi sweep budget exhausted on a {d}x{d} matrix")
    order = np.argsort(-w, kind="stable")
    w = w[order]
    z = v[:d, order] + 1j * v[d:, order]

    scale = max(1.0, float(np.max(np.abs(w))))
    vals = []
    vecs = []
    start = 0
    while start < 2 * d:
        stop = start + 1
        while stop < 2 * d and w[start] - w[stop] <= 1e-9 * scale:
            stop += 1
        need = (stop - start + 1) // 2
        cand = z[:, start:stop].copy()
        for q in vecs:
            cand -= np.outer(q, q.conj() @ cand)
        for _ in range(need):
            norms = np.linalg.norm(cand, axis=0)
            k = int(np.argmax(norms))
            if norms[k] < 1e-6:
                break
            q = cand[:, k] / norms[k]
            cand -= np.outer(q, q.conj() @ cand)
            vecs.append(q)
            vals.append(float(np.real(q.conj() @ h @ q)))
        start = stop
    if len(vecs) != d:
        raise NoConvergence("could not fold the doubled spectrum back to the complex space")
    vals = np.array(vals)
    vecs = np.stack(vecs, axis=1)
    order = np.argsort(-vals, kind="stable")
    return EigDecomposition(vals[order], vecs[:, order])


def eigvalsh(a, tol: float = DEFAULT.eig_tol) -> np.ndarray:
    return eig_hermitian(a, tol).eigenvalues


def tensor(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def partial_trace(a, dim_a: int, dim_b: int, keep: str = "A") -> np.ndarray:
    """Trace out one factor of an operator on A (x) B; ``keep`` is "A" or "B"."""
    a = as_cmatrix(a)
    n = dim_a * dim_b
    if a.shape != (n, n):
        raise DimensionMismatch(f"operator of shape {a.shape} is not on a {dim_a}x{dim_b} system")
    t = a.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "A":
        return np.einsum("ibjb->ij", t)
    if keep == "B":
        return np.einsum("aiaj->ij", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def trace_norm(a) -> float:
    """Sum of singular values (sum of |eigenvalues| for Hermitian input)."""
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"matrix is not square: {a.shape}")
    if a.size == 0:
        return 0.0
    if hermitian_defect(a) <= 1e-12:
        return float(np.sum(np.abs(eigvalsh(0.5 * (a + a.conj().T)))))
    s2 = eigvalsh(a.conj().T @ a)
    return float(np.sum(np.sqrt(np.clip(s2, 0.0, None))))


def op_norm(a, tol: float = DEFAULT.eig_tol) -> float:
    """Largest |eigenvalue| of a Hermitian matrix."""
    a = _require_hermitian(a, tol)
    if a.size == 0:
        return 0.0
    w = eigvalsh(a, tol)
    return float(max(abs(w[0]), abs(w[-1])))


def psd_check(a, tol: float = DEFAULT.eig_tol) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol * max(1, ||a||_inf)``."""
    a = _require_hermitian(a, max(tol, DEFAULT.eig_tol))
    if a.size == 0:
        return True
    w = eigvalsh(a, max(tol, DEFAULT.eig_tol))
    scale = max(1.0, abs(w[0]), abs(w[-1]))
    return bool(w[-1] >= -tol * scale)


def ket(i: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def ketbra(i: int, j: int, d: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


def gamma_vector(d: int) -> np.ndarray:
    """Unnormalized maximally entangled vector sum_j |j>|j>."""
    return np.eye(d, dtype=complex).reshape(d * d)


def hermitian_basis(d: int) -> list:
    """Orthonormal (Hilbert-Schmidt) basis of d x d Hermitian matrices."""
    basis = []
    for p in range(d):
        basis.append(ketbra(p, p, d))
    s = 1.0 / np.sqrt(2.0)
    for p in range(d):
        for q in range(p + 1, d):
            basis.append(s * (ketbra(p, q, d) + ketbra(q, p, d)))
            basis.append(s * (-1j * ketbra(p, q, d) + 1j * ketbra(q, p, d)))
    return basis


def _embedded_eigh(h):
    w, v, sweeps = kernels.jacobi_eigh(embed_hermitian(h))
    if sweeps < 0:
        raise NoConvergence("Jacobi sweep budget exhausted")
    return w, v


def hermitian_sign(h):
    """``(sign(h), ||h||_1)`` for Hermitian ``h``.

    Works on the real embedding directly: a spectral function of the
    embedding is the embedding of the spectral function, so no folding of
    the doubled spectrum is needed.
    """
    n = h.shape[0]
    w, v = _embedded_eigh(h)
    s = (v * np.sign(w)) @ v.T
    return s[:n, :n] + 1j * s[n:, :n], 0.5 * float(np.sum(np.abs(w)))


def top_eigvec(h):
    """Unit eigenvector for the largest eigenvalue of Hermitian ``h``, and that eigenvalue."""
    n = h.shape[0]
    w, v = _embedded_eigh(h)
    k = int(np.argmax(w))
    z = v[:n, k] + 1j * v[n:, k]
    return z / np.linalg.norm(z), float(w[k])
