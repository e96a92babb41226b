"""Simulation costs of Hermitian-preserving maps.

``gamma_tc``   -- cheapest scaled twisted channel (measurement-controlled
                  post-processing); equals the diamond norm.
``gamma_qpd``  -- cheapest quasi-probability decomposition into CPTN maps.
``diamond_variational`` -- independent lower bound on the diamond norm by
                  local ascent over pure bipartite inputs.
``robustness`` -- absolute robustness against twisted channels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hpsim import linalg as la
from hpsim.errors import NotHermitianPreserving, SolverFailure
from hpsim.maps import MapRep, is_hermitian_preserving
from hpsim.sdp import HermitianSdp, SdpSolution, solve
from hpsim.settings import DEFAULT, NumericSettings


def hermitian_basis_coo(n: int):
    """Sparse orthonormal Hermitian basis of n x n matrices as ``(rows, cols, vals)``."""
    s = 1.0 / np.sqrt(2.0)
    for p in range(n):
        yield np.array([p]), np.array([p]), np.array([1.0 + 0j])
    for p in range(n):
        for q in range(p + 1, n):
            yield np.array([p, q]), np.array([q, p]), np.array([s, s], dtype=complex)
            yield np.array([p, q]), np.array([q, p]), np.array([-1j * s, 1j * s])


def coo_inner(coo, m) -> float:
    """``tr(H m)`` for ``H`` given as COO (real part; exact for Hermitian pairs)."""
    r, c, v = coo
    return float(np.real(np.sum(v * m[c, r])))


def lift_a(coo, d_b: int):
    """COO of ``H (x) I_B`` from COO of ``H`` on A."""
    r, c, v = coo
    b = np.arange(d_b)
    rows = (r[:, None] * d_b + b[None, :]).ravel()
    cols = (c[:, None] * d_b + b[None, :]).ravel()
    return rows, cols, np.repeat(v, d_b)


def coo_trace(coo) -> float:
    r, c, v = coo
    return float(np.real(np.sum(v[r == c])))


def add_choi_difference(sdp: HermitianSdp, plus: int, minus: int, target: np.ndarray):
    """Constrain ``X_plus - X_minus = target`` through a full Hermitian basis."""
    n = target.shape[0]
    for coo in hermitian_basis_coo(n):
        r, c, v = coo
        sdp.add_constraint({plus: coo, minus: (r, c, -v)}, coo_inner(coo, target))


@dataclass
class CostResult:
    value: float
    m_plus: np.ndarray
    m_minus: np.ndarray
    solution: SdpSolution = field(repr=False)
    # QPD only: the separate normalisations of the two CPTN parts
    a: float | None = None
    b: float | None = None


def _require_hp(e: MapRep, settings: NumericSettings):
    if not is_hermitian_preserving(e, settings.tol):
        raise NotHermitianPreserving(
            f"Choi operator is not Hermitian (defect {la.hermitian_defect(e.choi):.3e})"
        )


def _check(sol: SdpSolution, what: str):
    if not sol.optimal:
        raise SolverFailure(f"{what}: solver stopped with status {sol.status.value} "
                            f"(gap {sol.gap:.2e}, residuals {sol.primal_residual:.2e}/{sol.dual_residual:.2e})")


def add_tc_normalisation(sdp: HermitianSdp, mp: int, mm: int, da: int, db: int) -> int:
    """Free variable ``alpha`` with ``tr_B(M+ + M-) = alpha I``, minimised."""
    alpha = sdp.add_free()
    sdp.set_free_objective(alpha, 1.0)
    for coo in hermitian_basis_coo(da):
        lifted = lift_a(coo, db)
        sdp.add_constraint({mp: lifted, mm: lifted}, 0.0, {alpha: -coo_trace(coo)})
    return alpha


def add_qpd_normalisation(sdp: HermitianSdp, mp: int, mm: int, da: int, db: int) -> int:
    """Free ``a``, ``b`` with ``tr_B M+ <= a I``, ``tr_B M- <= b I`` (PSD slacks), ``a + b`` minimised."""
    sp, sm = sdp.add_block(da), sdp.add_block(da)
    a = sdp.add_free(2)
    b = a + 1
    sdp.set_free_objective(a, 1.0)
    sdp.set_free_objective(b, 1.0)
    for coo in hermitian_basis_coo(da):
        lifted = lift_a(coo, db)
        tr = coo_trace(coo)
        sdp.add_constraint({mp: lifted, sp: coo}, 0.0, {a: -tr})
        sdp.add_constraint({mm: lifted, sm: coo}, 0.0, {b: -tr})
    return a


def tc_program(e: MapRep) -> tuple[HermitianSdp, int, int]:
    """``min alpha  s.t.  J = M+ - M-,  M+- >= 0,  tr_B(M+ + M-) = alpha I``."""
    da, db = e.dim_in, e.dim_out
    sdp = HermitianSdp()
    mp, mm = sdp.add_block(da * db), sdp.add_block(da * db)
    add_choi_difference(sdp, mp, mm, 0.5 * (e.choi + e.choi.conj().T))
    add_tc_normalisation(sdp, mp, mm, da, db)
    return sdp, mp, mm


def qpd_program(e: MapRep) -> tuple[HermitianSdp, int, int]:
    """``min a + b  s.t.  J = M+ - M-,  M+- >= 0,  tr_B M+ <= a I,  tr_B M- <= b I``."""
    da, db = e.dim_in, e.dim_out
    sdp = HermitianSdp()
    mp, mm = sdp.add_block(da * db), sdp.add_block(da * db)
    add_choi_difference(sdp, mp, mm, 0.5 * (e.choi + e.choi.conj().T))
    add_qpd_normalisation(sdp, mp, mm, da, db)
    return sdp, mp, mm


def gamma_tc(e: MapRep, settings: NumericSettings = DEFAULT, trace=None) -> CostResult:
    """Optimal overhead of simulating ``e`` with one scaled twisted channel."""
    _require_hp(e, settings)
    sdp, mp, mm = tc_program(e)
    sol = solve(sdp.build(), settings, trace=trace)
    _check(sol, "twisted-channel cost")
    blocks = sdp.hermitian_blocks(sol)
    return CostResult(float(sol.y[0]), blocks[mp], blocks[mm], sol)


def gamma_qpd(e: MapRep, settings: NumericSettings = DEFAULT, trace=None) -> CostResult:
    """Optimal overhead ``sum_j |alpha_j|`` over decompositions into CPTN maps."""
    _require_hp(e, settings)
    sdp, mp, mm = qpd_program(e)
    sol = solve(sdp.build(), settings, trace=trace)
    _check(sol, "QPD cost")
    blocks = sdp.hermitian_blocks(sol)
    a, b = float(sol.y[0]), float(sol.y[1])
    return CostResult(a + b, blocks[mp], blocks[mm], sol, a, b)


def robustness(e: MapRep, settings: NumericSettings = DEFAULT) -> float:
    """Absolute robustness, ``(gamma_tc - 1) / 2``."""
    return (gamma_tc(e, settings).value - 1.0) / 2.0


def diamond_variational(e: MapRep, restarts: int = 200, rng_seed=0, max_iter: int = 2000,
                        settings: NumericSettings = DEFAULT) -> float:
    """Lower bound on the diamond norm: best ``||(id (x) E)(psi)||_1`` found over pure ``psi``.

    Every pure input is ``(X (x) I)|Gamma>`` with ``||X||_F = 1``.  Each
    restart alternates between the sign matrix ``S`` of the current output
    and the unit ``X`` maximising ``tr[(X (x) I) J (X (x) I)^dag S]`` (a top
    eigenvector); the objective never decreases along the way.  Restart 0
    starts from the maximally entangled input, the rest from Ginibre draws on
    independent child streams of ``rng_seed``.
    """
    _require_hp(e, settings)
    da, db = e.dim_in, e.dim_out
    J = 0.5 * (e.choi + e.choi.conj().T)
    J4 = J.reshape(da, db, da, db)
    if not np.any(J):
        return 0.0

    def objective(x):
        y = np.einsum("aj,jbkc,ek->abec", x, J4, x.conj()).reshape(da * db, da * db)
        return la.hermitian_sign(y)

    best = 0.0
    streams = np.random.SeedSequence(rng_seed).spawn(max(restarts, 1))
    for r, ss in enumerate(streams):
        if r == 0:
            x = np.eye(da, dtype=complex) / np.sqrt(da)
        else:
            rng = np.random.default_rng(ss)
            x = rng.normal(size=(da, da)) + 1j * rng.normal(size=(da, da))
            x /= np.linalg.norm(x)
        s, f = objective(x)
        for _ in range(max_iter):
            s4 = s.reshape(da, db, da, db)
            q = np.einsum("jbkc,ecab->ekaj", J4, s4).reshape(da * da, da * da)
            v, _ = la.top_eigvec(0.5 * (q + q.conj().T))
            x = v.reshape(da, da)
            s, f_new = objective(x)
            done = f_new - f <= 1e-14 * max(1.0, f)
            f = max(f, f_new)
            if done:
                break
        best = max(best, f)
    return best


@dataclass
class CostReport:
    gamma_tc: float | None = None
    gamma_qpd: float | None = None
    diamond_independent: float | None = None
    robustness: float | None = None
    certificates: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        out = {}
        for k in ("gamma_tc", "gamma_qpd", "diamond_independent", "robustness"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out


def cost_report(e: MapRep, models=("tc", "qpd", "diamond", "robustness"),
                settings: NumericSettings = DEFAULT, restarts: int = 200, seed=0,
                trace=None) -> CostReport:
    rep = CostReport()
    models = set(models)
    if models & {"tc", "robustness"}:
        tc = gamma_tc(e, settings, trace)
        rep.certificates["tc"] = {"alpha": tc.value, "m_plus": tc.m_plus, "m_minus": tc.m_minus}
        if "tc" in models:
            rep.gamma_tc = tc.value
        if "robustness" in models:
            rep.robustness = (tc.value - 1.0) / 2.0
    if "qpd" in models:
        q = gamma_qpd(e, settings, trace)
        rep.gamma_qpd = q.value
        rep.certificates["qpd"] = {"a": q.a, "b": q.b, "m_plus": q.m_plus, "m_minus": q.m_minus}
    if "diamond" in models:
        rep.diamond_independent = diamond_variational(e, restarts, seed, settings=settings)
    return rep
