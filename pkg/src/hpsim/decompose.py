"""Executable decompositions: twisted channels and quasi-probability decompositions.

A :class:`TwistedChannel` is ``scale * sum_j sign_j M_j`` for a quantum
instrument ``{M_j}`` (the branches sum to a CPTP map).  A
:class:`QpdDecomposition` is ``sum_j alpha_j N_j`` with CPTN ``N_j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hpsim import linalg as la
from hpsim.errors import DimensionMismatch, InvalidCertificate, NotHermitianPreserving
from hpsim.maps import (KrausSet, MapRep, choi_from_kraus, is_hermitian_preserving,
                        kraus_from_choi, maps_close)
from hpsim.settings import DEFAULT, NumericSettings


@dataclass(frozen=True, eq=False)
class TwistedChannel:
    scale: float
    branches: tuple  # ((sign, KrausSet), ...)

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple((int(s), k) for s, k in self.branches))
        if self.scale < 0:
            raise ValueError("twisted-channel scale must be non-negative")
        if not self.branches:
            raise ValueError("a twisted channel needs at least one branch")
        if any(s not in (1, -1) for s, _ in self.branches):
            raise ValueError("branch signs must be +1 or -1")
        d = {(k.dim_in, k.dim_out) for _, k in self.branches}
        if len(d) != 1:
            raise DimensionMismatch("branches act between different spaces")

    @property
    def dim_in(self) -> int:
        return self.branches[0][1].dim_in

    @property
    def dim_out(self) -> int:
        return self.branches[0][1].dim_out

    def completeness_defect(self) -> float:
        """``||sum_j sum_K K^dag K - I||_F`` over every branch."""
        total = sum(k.effect() for _, k in self.branches)
        return float(np.linalg.norm(total - np.eye(self.dim_in)))

    def unit_map(self) -> MapRep:
        """``sum_j sign_j M_j`` (the twisted channel without its scale)."""
        choi = sum(s * choi_from_kraus(k).choi for s, k in self.branches)
        return MapRep(self.dim_in, self.dim_out, choi)

    def effective_map(self) -> MapRep:
        return self.scale * self.unit_map()

    def plus_minus(self) -> tuple[MapRep, MapRep]:
        """The CPTN parts ``T+`` and ``T-`` with ``T = T+ - T-``."""
        n = self.dim_in * self.dim_out
        parts = {1: np.zeros((n, n), dtype=complex), -1: np.zeros((n, n), dtype=complex)}
        for s, k in self.branches:
            parts[s] = parts[s] + choi_from_kraus(k).choi
        return MapRep(self.dim_in, self.dim_out, parts[1]), MapRep(self.dim_in, self.dim_out, parts[-1])

    def check(self, target: MapRep | None = None, settings: NumericSettings = DEFAULT) -> list:
        """Invariant violations as human-readable strings (empty when valid)."""
        problems = []
        if self.completeness_defect() > settings.tol * max(1.0, np.sqrt(self.dim_in)):
            problems.append(f"instrument is not complete (defect {self.completeness_defect():.3e})")
        for j, (_, k) in enumerate(self.branches):
            if not k.is_tni(settings.tol):
                problems.append(f"branch {j} is not trace-non-increasing")
        if target is not None and not maps_close(target, self.effective_map(), settings.tol):
            problems.append("effective map differs from the target")
        return problems


@dataclass(frozen=True, eq=False)
class QpdDecomposition:
    terms: tuple  # ((alpha, KrausSet), ...)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(a), k) for a, k in self.terms))
        if not self.terms:
            raise ValueError("a decomposition needs at least one term")
        d = {(k.dim_in, k.dim_out) for _, k in self.terms}
        if len(d) != 1:
            raise DimensionMismatch("terms act between different spaces")

    @property
    def gamma(self) -> float:
        return float(sum(abs(a) for a, _ in self.terms))

    @property
    def dim_in(self) -> int:
        return self.terms[0][1].dim_in

    @property
    def dim_out(self) -> int:
        return self.terms[0][1].dim_out

    def effective_map(self) -> MapRep:
        choi = sum(a * choi_from_kraus(k).choi for a, k in self.terms)
        return MapRep(self.dim_in, self.dim_out, choi)

    def check(self, target: MapRep | None = None, settings: NumericSettings = DEFAULT) -> list:
        problems = []
        for j, (_, k) in enumerate(self.terms):
            if not k.is_tni(settings.tol):
                problems.append(f"term {j} is not trace-non-increasing")
        if target is not None and not maps_close(target, self.effective_map(), settings.tol):
            problems.append("effective map differs from the target")
        return problems


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _tr_b(choi, da, db):
    return la.partial_trace(choi, da, db, keep="A")


def _psd_part(h, rel: float = 0.0):
    """Keep the eigen-components of (the Hermitian part of) ``h`` above ``rel * max(1, ||h||)``."""
    eig = la.eig_hermitian(0.5 * (h + h.conj().T), 1e-6)
    w = eig.eigenvalues
    cut = rel * max(1.0, float(np.max(np.abs(w)))) if w.size else 0.0
    w = np.where(w > cut, w, 0.0)
    v = eig.eigenvectors
    return (v * w) @ v.conj().T


def _clean_pair(choi, m_plus, m_minus, settings):
    """Strip interior-point residue from a certificate while keeping ``M+ - M- = J``.

    The solver's points sit slightly inside the cone, so both blocks carry
    eigenvalues of the order of the final duality gap in every direction.
    ``M-`` is truncated, ``M+`` rebuilt as ``J + M-`` and truncated in turn.
    """
    rel = 10.0 * max(settings.gap_tol, settings.feas_tol)
    mm = _psd_part(m_minus, rel)
    mp = _psd_part(choi + mm, rel)
    return mp, mm


def _first_projector(d):
    p = np.zeros((d, d), dtype=complex)
    p[0, 0] = 1.0
    return p


def _trivial_channel(da, db) -> KrausSet:
    """Identity when the spaces agree, otherwise ``rho -> tr(rho)|0><0|``."""
    if da == db:
        return KrausSet(da, db, (np.eye(da, dtype=complex),))
    ops = []
    for j in range(da):
        k = np.zeros((db, da), dtype=complex)
        k[0, j] = 1.0
        ops.append(k)
    return KrausSet(da, db, tuple(ops))


def zero_twisted(da: int, db: int) -> TwistedChannel:
    return TwistedChannel(0.0, ((1, _trivial_channel(da, db)),))


def _padding(delta, da, db) -> KrausSet:
    """CPTN map ``rho -> tr(delta^T rho / 2)|0><0|``; its Choi is ``delta/2 (x) |0><0|``."""
    return kraus_from_choi(MapRep(da, db, np.kron(0.5 * delta, _first_projector(db))))


def _nonempty(branches):
    return tuple((s, k) for s, k in branches if k.kraus)


def _scale_tol(x):
    return max(1.0, abs(x))


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def twisted_from_certificate(e: MapRep, m_plus, m_minus, alpha: float,
                             settings: NumericSettings = DEFAULT) -> TwistedChannel:
    """Twisted channel with branches ``M+/alpha`` (sign +) and ``M-/alpha`` (sign -).

    The certificate must satisfy ``J = M+ - M-``, ``M+- >= 0`` and
    ``tr_B(M+ + M-) = alpha I`` to within ``settings.cert_tol``.  Solver noise
    is then removed: residual interior-point eigenvalues are truncated, the
    scale becomes ``lambda_max(tr_B(M+ + M-))`` and the completeness deficit
    is added to both parts through ``rho -> tr(delta^T rho)|0><0|``.
    """
    da, db = e.dim_in, e.dim_out
    m_plus = np.asarray(m_plus, dtype=complex)
    m_minus = np.asarray(m_minus, dtype=complex)
    ctol = settings.cert_tol
    jscale = max(1.0, np.linalg.norm(e.choi))
    if np.linalg.norm(e.choi - (m_plus - m_minus)) > ctol * jscale:
        raise InvalidCertificate("M+ - M- does not reproduce the Choi operator")
    t = _tr_b(m_plus + m_minus, da, db)
    if np.linalg.norm(t - alpha * np.eye(da)) > ctol * _scale_tol(alpha) * np.sqrt(da):
        raise InvalidCertificate("tr_B(M+ + M-) is not proportional to the identity")
    for name, m in (("M+", m_plus), ("M-", m_minus)):
        if not la.psd_check(0.5 * (m + m.conj().T), ctol):
            raise InvalidCertificate(f"{name} is not positive semidefinite")
    if alpha <= ctol:
        return zero_twisted(da, db)

    mp, mm = _clean_pair(0.5 * (e.choi + e.choi.conj().T), m_plus, m_minus, settings)
    t = _tr_b(mp + mm, da, db)
    alpha = float(la.eigvalsh(t, 1e-6)[0])
    # top up both parts equally so the instrument is complete; J is untouched
    pad = np.kron(0.5 * _psd_part(alpha * np.eye(da) - t, settings.kraus_tol),
                  _first_projector(db))
    mp, mm = mp + pad, mm + pad
    branches = ((1, kraus_from_choi(MapRep(da, db, mp / alpha), settings.kraus_tol)),
                (-1, kraus_from_choi(MapRep(da, db, mm / alpha), settings.kraus_tol)))
    return TwistedChannel(float(alpha), _nonempty(branches))


def qpd_from_certificate(e: MapRep, m_plus, m_minus, a: float, b: float,
                         settings: NumericSettings = DEFAULT) -> QpdDecomposition:
    """Terms ``(+a, M+/a)`` and ``(-b, M-/b)``; zero-weight terms are dropped."""
    da, db = e.dim_in, e.dim_out
    m_plus = np.asarray(m_plus, dtype=complex)
    m_minus = np.asarray(m_minus, dtype=complex)
    ctol = settings.cert_tol
    if np.linalg.norm(e.choi - (m_plus - m_minus)) > ctol * max(1.0, np.linalg.norm(e.choi)):
        raise InvalidCertificate("M+ - M- does not reproduce the Choi operator")
    for m in (m_plus, m_minus):
        if not la.psd_check(0.5 * (m + m.conj().T), ctol):
            raise InvalidCertificate("certificate block is not positive semidefinite")
    mp, mm = _clean_pair(0.5 * (e.choi + e.choi.conj().T), m_plus, m_minus, settings)
    terms = []
    for sign, m, w in ((1.0, mp, a), (-1.0, mm, b)):
        top = la.eigvalsh(_tr_b(m, da, db), 1e-6)[0] if m.size else 0.0
        if top > w + ctol * _scale_tol(w):
            raise InvalidCertificate("partial trace exceeds its normalisation")
        if w <= ctol or top <= 0.0:
            continue
        w = top
        k = kraus_from_choi(MapRep(da, db, m / w), settings.kraus_tol)
        if k.kraus:
            terms.append((sign * w, k))
    if not terms:
        terms.append((0.0, _trivial_channel(da, db)))
    return QpdDecomposition(tuple(terms))


def combine_twisted(terms) -> TwistedChannel:
    """One scaled twisted channel equal to ``sum_j alpha_j T_j`` at overhead ``sum_j |alpha_j|``.

    Negative coefficients flip the branch signs; the two CPTN parts are the
    mixtures ``W+- = sum_j p_j T_j^+-`` with ``p_j = |alpha_j| / alpha``.  A
    term's own scale multiplies its coefficient.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("nothing to combine")
    da, db = terms[0][1].dim_in, terms[0][1].dim_out
    if any((t.dim_in, t.dim_out) != (da, db) for _, t in terms):
        raise DimensionMismatch("twisted channels act between different spaces")
    coeffs = [float(a) * t.scale for a, t in terms]
    alpha = sum(abs(c) for c in coeffs)
    if alpha == 0.0:
        return zero_twisted(da, db)
    plus, minus = [], []
    for c, (_, t) in zip(coeffs, terms):
        if c == 0.0:
            continue
        p = abs(c) / alpha
        flip = 1 if c > 0 else -1
        for s, k in t.branches:
            (plus if s * flip > 0 else minus).extend(np.sqrt(p) * op for op in k.kraus)
    branches = ((1, KrausSet(da, db, tuple(plus))), (-1, KrausSet(da, db, tuple(minus))))
    return TwistedChannel(alpha, _nonempty(branches))


def hp_to_twisted(e: MapRep, settings: NumericSettings = DEFAULT) -> TwistedChannel:
    """Some (not necessarily optimal) scaled twisted channel equal to ``e``.

    Splits the Choi operator into positive and negative parts, scales both by
    the largest eigenvalue of ``tr_B(J+ + J-)``, and completes the instrument
    with a cancelling +/- pair of a padding map.
    """
    if not is_hermitian_preserving(e, settings.tol):
        raise NotHermitianPreserving("map is not Hermitian-preserving")
    da, db = e.dim_in, e.dim_out
    eig = la.eig_hermitian(0.5 * (e.choi + e.choi.conj().T), 1e-6)
    v, w = eig.eigenvectors, eig.eigenvalues
    jp = (v * np.clip(w, 0.0, None)) @ v.conj().T
    jm = (v * np.clip(-w, 0.0, None)) @ v.conj().T
    t = _tr_b(jp + jm, da, db)
    alpha = la.eigvalsh(t, 1e-6)[0]
    if alpha <= settings.tol * max(1.0, np.linalg.norm(e.choi)):
        return zero_twisted(da, db)
    mp, mm = jp / alpha, jm / alpha
    delta = np.eye(da) - t / alpha
    branches = [(1, kraus_from_choi(MapRep(da, db, mp), settings.kraus_tol)),
                (-1, kraus_from_choi(MapRep(da, db, mm), settings.kraus_tol))]
    if np.linalg.norm(delta) > settings.kraus_tol:
        pad = _padding(_psd_part(delta), da, db)
        branches += [(1, pad), (-1, pad)]
    return TwistedChannel(float(alpha), _nonempty(branches))
