"""Linear maps between operator spaces: Choi and Kraus forms, predicates, constructors.

The Choi operator of ``E: L(A) -> L(B)`` is
``J = sum_jk |j><k| (x) E(|j><k|)`` with the input as the major index, so
the map is trace preserving exactly when ``tr_B J = I_A``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hpsim import linalg as la
from hpsim.errors import DimensionMismatch, InvalidSpec, NotCP, ParamOutOfRange
from hpsim.settings import DEFAULT


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MapRep:
    dim_in: int
    dim_out: int
    choi: np.ndarray

    def __post_init__(self):
        choi = _frozen(self.choi)
        n = self.dim_in * self.dim_out
        if choi.shape != (n, n):
            raise DimensionMismatch(
                f"Choi of shape {choi.shape} does not fit {self.dim_in} -> {self.dim_out}"
            )
        if not np.all(np.isfinite(choi)):
            raise ValueError("Choi operator has non-finite entries")
        object.__setattr__(self, "choi", choi)

    def choi4(self) -> np.ndarray:
        """Choi as a rank-4 tensor ``[a, b, a', b']``."""
        return self.choi.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)

    def _check_dims(self, other):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionMismatch("maps act between different spaces")

    def __add__(self, other: MapRep) -> MapRep:
        self._check_dims(other)
        return MapRep(self.dim_in, self.dim_out, self.choi + other.choi)

    def __sub__(self, other: MapRep) -> MapRep:
        self._check_dims(other)
        return MapRep(self.dim_in, self.dim_out, self.choi - other.choi)

    def __mul__(self, c) -> MapRep:
        return MapRep(self.dim_in, self.dim_out, c * self.choi)

    __rmul__ = __mul__

    def __neg__(self) -> MapRep:
        return MapRep(self.dim_in, self.dim_out, -self.choi)

    def __repr__(self):
        return f"MapRep(dim_in={self.dim_in}, dim_out={self.dim_out})"


@dataclass(frozen=True, eq=False)
class KrausSet:
    """A CP map ``rho -> sum_m K_m rho K_m^dag`` with ``d_out x d_in`` operators."""

    dim_in: int
    dim_out: int
    kraus: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.kraus)
        for k in ops:
            if k.shape != (self.dim_out, self.dim_in):
                raise DimensionMismatch(
                    f"Kraus operator of shape {k.shape}, expected {(self.dim_out, self.dim_in)}"
                )
        object.__setattr__(self, "kraus", ops)

    def effect(self) -> np.ndarray:
        """``sum_m K_m^dag K_m`` (the map's POVM element on the input)."""
        acc = np.zeros((self.dim_in, self.dim_in), dtype=complex)
        for k in self.kraus:
            acc += k.conj().T @ k
        return acc

    def is_tp(self, tol: float = DEFAULT.tol) -> bool:
        return bool(np.linalg.norm(self.effect() - np.eye(self.dim_in)) <= tol * max(1.0, np.sqrt(self.dim_in)))

    def is_tni(self, tol: float = DEFAULT.tol) -> bool:
        return bool(la.psd_check(np.eye(self.dim_in) - self.effect(), tol))

    def apply(self, rho) -> np.ndarray:
        rho = la.as_cmatrix(rho)
        if rho.shape != (self.dim_in, self.dim_in):
            raise DimensionMismatch(f"state of shape {rho.shape} for a {self.dim_in}-dim input")
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return out

    def scaled(self, c: float) -> KrausSet:
        """Kraus set of ``c * self`` for ``c >= 0``."""
        r = np.sqrt(c)
        return KrausSet(self.dim_in, self.dim_out, tuple(r * k for k in self.kraus))


@dataclass(frozen=True)
class ExtractionSpec:
    """Entry-extraction map data: input dimension, kept indices, and upper-triangle pairs."""

    d: int
    indices: tuple
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "pairs", tuple(sorted({(int(j), int(k)) for j, k in self.pairs})))
        self.validate()

    @property
    def d_out(self) -> int:
        return len(self.indices)

    def validate(self):
        idx = self.indices
        if self.d < 1:
            raise InvalidSpec("input dimension must be positive")
        if not idx:
            raise InvalidSpec("index set is empty")
        if any(i < 0 or i >= self.d for i in idx):
            raise InvalidSpec(f"indices {idx} out of range for d={self.d}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise InvalidSpec(f"indices {idx} are not strictly increasing")
        for j, k in self.pairs:
            if not 0 <= j <= k < len(idx):
                raise InvalidSpec(f"pair {(j, k)} invalid for {len(idx)} kept indices")

    def symmetric_pairs(self) -> list:
        """The closure A u A*, computed on demand."""
        return sorted(set(self.pairs) | {(k, j) for j, k in self.pairs})


# ---------------------------------------------------------------------------
# conversions and action
# ---------------------------------------------------------------------------


def choi_from_kraus(k: KrausSet) -> MapRep:
    n = k.dim_in * k.dim_out
    choi = np.zeros((n, n), dtype=complex)
    for op in k.kraus:
        v = op.T.reshape(n)  # (I (x) K)|Gamma> has entry K[b, j] at (j, b)
        choi += np.outer(v, v.conj())
    return MapRep(k.dim_in, k.dim_out, choi)


def kraus_from_choi(m: MapRep, tol: float = DEFAULT.kraus_tol) -> KrausSet:
    """Kraus operators ``sqrt(lam) * reshape(v)`` from the Choi eigendecomposition.

    Eigenvalues below ``tol * ||J||_inf`` are dropped; an eigenvalue below
    ``-tol * max(1, ||J||_inf)`` raises ``NotCP``.
    """
    eig = la.eig_hermitian(0.5 * (m.choi + m.choi.conj().T), max(DEFAULT.eig_tol, 1e-8))
    w = eig.eigenvalues
    scale = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if w.size and w[-1] < -tol * max(1.0, scale):
        raise NotCP(f"Choi operator has eigenvalue {w[-1]:.3e}")
    ops = []
    for lam, v in zip(w, eig.eigenvectors.T):
        if lam <= tol * scale:
            continue
        ops.append(np.sqrt(lam) * v.reshape(m.dim_in, m.dim_out).T)
    return KrausSet(m.dim_in, m.dim_out, tuple(ops))


def apply(m: MapRep, rho) -> np.ndarray:
    """``E(rho) = tr_A[(rho^T (x) I) J]``."""
    rho = la.as_cmatrix(rho)
    if rho.shape != (m.dim_in, m.dim_in):
        raise DimensionMismatch(f"state of shape {rho.shape} for a {m.dim_in}-dim input")
    return np.einsum("pq,pxqy->xy", rho, m.choi4())


def compose(later: MapRep, earlier: MapRep) -> MapRep:
    """Choi of ``later o earlier`` (link product)."""
    if earlier.dim_out != later.dim_in:
        raise DimensionMismatch(
            f"cannot compose: earlier outputs {earlier.dim_out}, later expects {later.dim_in}"
        )
    j4 = np.einsum("jpkq,pxqy->jxky", earlier.choi4(), later.choi4())
    n = earlier.dim_in * later.dim_out
    return MapRep(earlier.dim_in, later.dim_out, j4.reshape(n, n))


def as_map(x) -> MapRep:
    return choi_from_kraus(x) if isinstance(x, KrausSet) else x


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------


def _tr_b(m: MapRep) -> np.ndarray:
    return la.partial_trace(m.choi, m.dim_in, m.dim_out, keep="A")


def is_hermitian_preserving(m: MapRep, tol: float = DEFAULT.tol) -> bool:
    return la.hermitian_defect(m.choi) <= tol


def is_cp(m: MapRep, tol: float = DEFAULT.tol) -> bool:
    if not is_hermitian_preserving(m, tol):
        return False
    return la.psd_check(0.5 * (m.choi + m.choi.conj().T), tol)


def is_tp(m: MapRep, tol: float = DEFAULT.tol) -> bool:
    t = _tr_b(m)
    return bool(np.linalg.norm(t - np.eye(m.dim_in)) <= tol * max(1.0, np.sqrt(m.dim_in)))


def is_tni(m: MapRep, tol: float = DEFAULT.tol) -> bool:
    t = _tr_b(m)
    if la.hermitian_defect(t) > tol:
        return False
    return la.psd_check(np.eye(m.dim_in) - 0.5 * (t + t.conj().T), tol)


def maps_close(m1: MapRep, m2: MapRep, tol: float = DEFAULT.tol) -> bool:
    """``||J1 - J2||_F <= tol * max(1, ||J1||_F)``."""
    if (m1.dim_in, m1.dim_out) != (m2.dim_in, m2.dim_out):
        return False
    return bool(np.linalg.norm(m1.choi - m2.choi) <= tol * max(1.0, np.linalg.norm(m1.choi)))


def choi_distance(m1: MapRep, m2: MapRep) -> float:
    return float(np.linalg.norm(m1.choi - m2.choi))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _check_eps(eps):
    if not 0.0 <= eps <= 1.0:
        raise ParamOutOfRange(f"noise level {eps} outside [0, 1]")


def amplitude_damping(eps: float) -> KrausSet:
    _check_eps(eps)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - eps)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(eps)], [0.0, 0.0]], dtype=complex)
    return KrausSet(2, 2, (k0, k1))


def dephasing(eps: float) -> KrausSet:
    _check_eps(eps)
    return KrausSet(2, 2, (np.sqrt(1.0 - eps / 2) * la.PAULI_I, np.sqrt(eps / 2) * la.PAULI_Z))


def depolarizing(eps: float) -> MapRep:
    """``rho -> (1 - eps) rho + eps tr(rho) I/2`` built in Choi form."""
    _check_eps(eps)
    g = la.gamma_vector(2)
    choi = (1.0 - eps) * np.outer(g, g) + eps * np.eye(4) / 2
    return MapRep(2, 2, choi)


def identity_map(d: int) -> MapRep:
    g = la.gamma_vector(d)
    return MapRep(d, d, np.outer(g, g.conj()))


def transpose_map(d: int) -> MapRep:
    """``rho -> rho^T``; its Choi operator is the swap."""
    n = d * d
    swap = np.zeros((n, n), dtype=complex)
    for j in range(d):
        for k in range(d):
            swap[j * d + k, k * d + j] = 1.0
    return MapRep(d, d, swap)


def parity_sign_map() -> MapRep:
    """``rho -> P0 rho P0 - P1 rho P1`` on a qubit."""
    choi = np.zeros((4, 4), dtype=complex)
    choi[0, 0] = 1.0
    choi[3, 3] = -1.0
    return MapRep(2, 2, choi)


def zero_map(d_in: int, d_out: int | None = None) -> MapRep:
    d_out = d_in if d_out is None else d_out
    return MapRep(d_in, d_out, np.zeros((d_in * d_out,) * 2, dtype=complex))


def entry_extraction(spec: ExtractionSpec) -> MapRep:
    """Choi ``sum_{(j,k) in A u A*} |i_j><i_k|_d (x) |j><k|_{d'}``."""
    spec.validate()
    d, dp = spec.d, spec.d_out
    choi = np.zeros((d * dp, d * dp), dtype=complex)
    for j, k in spec.symmetric_pairs():
        choi[spec.indices[j] * dp + j, spec.indices[k] * dp + k] += 1.0
    return MapRep(d, dp, choi)


def random_hp_map(d_in: int, d_out: int, rng) -> MapRep:
    """``J = H / ||H||_F`` with ``H`` drawn from the GUE."""
    n = d_in * d_out
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (g + g.conj().T)
    return MapRep(d_in, d_out, h / np.linalg.norm(h))


def random_cptp(d_in: int, d_out: int, rng, rank: int | None = None) -> KrausSet:
    """Haar-ish random channel from a random isometry (QR of a Ginibre matrix)."""
    rank = rank or d_in * d_out
    g = rng.normal(size=(rank * d_out, d_in)) + 1j * rng.normal(size=(rank * d_out, d_in))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return KrausSet(d_in, d_out, tuple(q[i * d_out:(i + 1) * d_out] for i in range(rank)))


def random_density_matrix(d: int, rng, rank: int | None = None) -> np.ndarray:
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(d: int, rng) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def map_from_function(f, d_in: int, d_out: int) -> MapRep:
    """Choi operator of an arbitrary linear function on ``d_in x d_in`` matrices."""
    n = d_in * d_out
    choi = np.zeros((n, n), dtype=complex)
    for j in range(d_in):
        for k in range(d_in):
            choi[j * d_out:(j + 1) * d_out, k * d_out:(k + 1) * d_out] = f(la.ketbra(j, k, d_in))
    return MapRep(d_in, d_out, choi)


def kraus_sum(ks: Sequence[KrausSet]) -> KrausSet:
    """Concatenate Kraus lists (the sum of the CP maps)."""
    ks = list(ks)
    ops = tuple(op for k in ks for op in k.kraus)
    return KrausSet(ks[0].dim_in, ks[0].dim_out, ops)

