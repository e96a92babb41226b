"""Small dense semidefinite programs.

Primal / dual pair in block form::

    min  sum_b <C_b, X_b> + c_f . y       max  b . lam
    s.t. sum_b <A_ib, X_b> + (F y)_i = b_i  s.t. C_b - sum_i lam_i A_ib = S_b >= 0
         X_b >= 0, y free                        F^T lam = c_f

Solved by an infeasible-start primal-dual path-following method (HKM
direction, Mehrotra predictor-corrector).  Free scalars enter the Newton
system as a saddle-point block instead of being split into PSD pairs.

Complex Hermitian programs are mapped onto this real form by
:class:`HermitianSdp`: a Hermitian block of size n becomes a real block of
size 2n through ``H = A + iB -> [[A, -B], [B, A]]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla

from hpsim import linalg as la
from hpsim._backend import kernels
from hpsim.errors import DimensionMismatch, IllPosed, NotHermitian
from hpsim.settings import DEFAULT, NumericSettings


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True, eq=False)
class BlockCoeffs:
    """COO entries of every constraint matrix on one block, grouped by constraint."""

    indptr: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.indptr) - 1), np.diff(self.indptr))


@dataclass(frozen=True, eq=False)
class SdpProblem:
    block_dims: tuple
    objective: tuple  # dense symmetric C_b
    coeffs: tuple  # BlockCoeffs per block
    rhs: np.ndarray
    free_objective: np.ndarray
    free_coeffs: np.ndarray  # (m, n_free)

    @property
    def n_constraints(self) -> int:
        return len(self.rhs)

    @property
    def n_free(self) -> int:
        return len(self.free_objective)

    def a_op(self, X) -> np.ndarray:
        """``(sum_b <A_ib, X_b>)_i``."""
        out = np.zeros(self.n_constraints)
        for bc, x in zip(self.coeffs, X):
            if len(bc.vals):
                out += np.bincount(bc.owner, weights=bc.vals * x[bc.rows, bc.cols],
                                   minlength=self.n_constraints)
        return out

    def at_op(self, lam) -> list:
        """``sum_i lam_i A_ib`` for every block."""
        out = []
        for n, bc in zip(self.block_dims, self.coeffs):
            flat = np.bincount(bc.rows * n + bc.cols, weights=bc.vals * lam[bc.owner],
                               minlength=n * n)
            out.append(flat.reshape(n, n))
        return out

    def scaled(self, c: float) -> SdpProblem:
        """Same feasible set, objective multiplied by ``c``."""
        return SdpProblem(self.block_dims, tuple(c * o for o in self.objective), self.coeffs,
                          self.rhs, c * self.free_objective, self.free_coeffs)

    @classmethod
    def from_dense(cls, block_dims, objective, constraints, rhs, free_objective=(), free_coeffs=None):
        """Build from dense data; ``constraints[i][b]`` is the matrix of constraint i on block b."""
        b = SdpBuilder()
        for n in block_dims:
            b.add_block(n)
        nf = len(free_objective)
        if nf:
            b.add_free(nf)
            for j, c in enumerate(free_objective):
                b.free_obj[j] = float(c)
        for k, c in enumerate(objective):
            b.set_objective(k, c)
        for i, (mats, r) in enumerate(zip(constraints, rhs)):
            free = {} if free_coeffs is None else {j: free_coeffs[i][j] for j in range(nf)}
            b.add_constraint({k: m for k, m in enumerate(mats) if m is not None}, r, free)
        return b.build()


class SdpBuilder:
    """Incremental construction of an :class:`SdpProblem`."""

    def __init__(self):
        self.block_dims = []
        self.obj = []
        self.free_obj = []
        self.rhs = []
        self.free_rows = []
        self.entries = []  # per block: list of (con, rows, cols, vals)

    def add_block(self, n: int) -> int:
        self.block_dims.append(int(n))
        self.obj.append(np.zeros((n, n)))
        self.entries.append([])
        return len(self.block_dims) - 1

    def add_free(self, count: int = 1) -> int:
        first = len(self.free_obj)
        self.free_obj.extend([0.0] * count)
        return first

    def set_objective(self, block: int, c):
        c = np.asarray(c, dtype=float)
        if c.shape != self.obj[block].shape or not np.allclose(c, c.T):
            raise DimensionMismatch("objective coefficient must be symmetric and block-sized")
        self.obj[block] = 0.5 * (c + c.T)

    def add_constraint(self, terms: dict, rhs: float, free: dict | None = None) -> int:
        """``terms`` maps block -> dense symmetric matrix or (rows, cols, vals) with both triangles."""
        con = len(self.rhs)
        for block, t in terms.items():
            if isinstance(t, tuple):
                r, c, v = (np.asarray(x) for x in t)
            else:
                t = np.asarray(t, dtype=float)
                if t.shape != (self.block_dims[block],) * 2 or not np.allclose(t, t.T):
                    raise DimensionMismatch("constraint coefficient must be symmetric and block-sized")
                r, c = np.nonzero(t)
                v = t[r, c]
            if len(v):
                self.entries[block].append((con, r.astype(np.int64), c.astype(np.int64),
                                            v.astype(float)))
        self.rhs.append(float(rhs))
        self.free_rows.append(dict(free or {}))
        return con

    def build(self) -> SdpProblem:
        m = len(self.rhs)
        coeffs = []
        for ents in self.entries:
            ents = sorted(ents, key=lambda e: e[0])
            counts = np.zeros(m, dtype=np.int64)
            for con, r, _, _ in ents:
                counts[con] += len(r)
            indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            cat = (lambda k: np.concatenate([e[k] for e in ents]) if ents else np.zeros(0))
            coeffs.append(BlockCoeffs(indptr, cat(1).astype(np.int64), cat(2).astype(np.int64),
                                      cat(3).astype(float)))
        nf = len(self.free_obj)
        F = np.zeros((m, nf))
        for i, row in enumerate(self.free_rows):
            for j, v in row.items():
                F[i, j] = v
        return SdpProblem(tuple(self.block_dims), tuple(self.obj), tuple(coeffs),
                          np.array(self.rhs, dtype=float), np.array(self.free_obj, dtype=float), F)


@dataclass(eq=False)
class SdpSolution:
    X: list
    y: np.ndarray
    lam: np.ndarray
    S: list
    primal_objective: float
    dual_objective: float
    status: Status
    iterations: int = 0
    gap: float = np.nan  # relative duality gap
    primal_residual: float = np.nan  # relative
    dual_residual: float = np.nan  # relative
    dropped_constraints: tuple = ()
    history: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def _schur(problem: SdpProblem, X, Sinv) -> np.ndarray:
    m = problem.n_constraints
    M = np.zeros((m, m))
    for bc, x, si in zip(problem.coeffs, X, Sinv):
        if len(bc.vals):
            kernels.schur_block(bc.indptr, bc.rows, bc.cols, bc.vals,
                                np.ascontiguousarray(x), np.ascontiguousarray(si), M)
    return M


def _presolve(problem: SdpProblem, tol: float):
    """Drop linearly dependent constraints; report inconsistency.

    Returns ``(keep, consistent)`` where ``keep`` indexes retained rows.
    """
    m = problem.n_constraints
    eye = [np.eye(n) for n in problem.block_dims]
    G = _schur(problem, eye, eye) + problem.free_coeffs @ problem.free_coeffs.T
    scale = max(1.0, float(np.max(np.abs(np.diag(G))))) if m else 1.0
    try:
        L = np.linalg.cholesky(G)
        if np.min(np.diag(L)) ** 2 > 1e-10 * scale:
            return np.arange(m), True
    except np.linalg.LinAlgError:
        pass
    # pivoted Cholesky on the Gram matrix picks a maximal independent row set
    keep = []
    R = G.copy()
    diag = np.diag(R).copy()
    basis = np.zeros((m, 0))
    while True:
        k = int(np.argmax(diag))
        if diag[k] <= 1e-10 * scale:
            break
        col = (G[:, k] - basis @ basis[k]) / np.sqrt(diag[k])
        basis = np.column_stack([basis, col])
        diag = diag - col ** 2
        diag[k] = 0.0
        keep.append(k)
    keep = np.array(sorted(keep), dtype=np.int64)
    drop = np.setdiff1d(np.arange(m), keep)
    if len(drop) == 0:
        return keep, True
    Gkk = G[np.ix_(keep, keep)]
    coef = np.linalg.solve(Gkk, G[np.ix_(keep, drop)])
    implied = coef.T @ problem.rhs[keep]
    consistent = bool(np.all(np.abs(implied - problem.rhs[drop]) <= tol * (1.0 + np.abs(problem.rhs[drop]))))
    return keep, consistent


def _restrict(problem: SdpProblem, keep) -> SdpProblem:
    if len(keep) == problem.n_constraints:
        return problem
    remap = -np.ones(problem.n_constraints, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    coeffs = []
    for bc in problem.coeffs:
        owner = remap[bc.owner]
        sel = owner >= 0
        counts = np.bincount(owner[sel], minlength=len(keep))
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        coeffs.append(BlockCoeffs(indptr, bc.rows[sel], bc.cols[sel], bc.vals[sel]))
    return SdpProblem(problem.block_dims, problem.objective, tuple(coeffs), problem.rhs[keep],
                      problem.free_objective, problem.free_coeffs[keep])


def _max_step(X, dX) -> float:
    """Largest t with X + t dX PSD (inf when dX keeps X inside the cone)."""
    t = np.inf
    for x, dx in zip(X, dX):
        L = np.linalg.cholesky(x)
        W = sla.solve_triangular(L, dx, lower=True)
        W = sla.solve_triangular(L, W.T, lower=True)
        w = sla.eigvalsh(0.5 * (W + W.T))
        if w[0] < 0:
            t = min(t, -1.0 / w[0])
    return t


def _inner(A, B) -> float:
    return float(sum(np.sum(a * b) for a, b in zip(A, B)))


def solve(problem: SdpProblem, settings: NumericSettings = DEFAULT, trace=None,
          init_seed: int | None = None) -> SdpSolution:
    """Solve ``problem`` to the relative duality gap and residuals in ``settings``.

    ``trace`` receives one dict per iteration.  ``init_seed`` perturbs the
    default interior starting point (for robustness checks).
    """
    keep, consistent = _presolve(problem, max(settings.feas_tol, 1e-9))
    dropped = tuple(int(i) for i in np.setdiff1d(np.arange(problem.n_constraints), keep))
    full = problem
    problem = _restrict(problem, keep)
    _check_free(problem)
    nb = len(problem.block_dims)
    X_shape = [np.zeros((n, n)) for n in problem.block_dims]
    if not consistent:
        return SdpSolution(X_shape, np.zeros(problem.n_free), np.zeros(full.n_constraints),
                           X_shape, np.inf, np.inf, Status.INFEASIBLE, 0,
                           dropped_constraints=dropped)

    b = problem.rhs
    C = problem.objective
    F = problem.free_coeffs
    cf = problem.free_objective
    m, nf = problem.n_constraints, problem.n_free
    N = sum(problem.block_dims)

    data = max([1.0, float(np.max(np.abs(b))) if m else 0.0]
               + [float(np.max(np.abs(c))) for c in C if c.size]
               + ([float(np.max(np.abs(cf)))] if nf else []))
    tau = 1.0 + data
    rng = np.random.default_rng(init_seed) if init_seed is not None else None
    X, S = [], []
    for n in problem.block_dims:
        if rng is None:
            X.append(tau * np.eye(n))
            S.append(tau * np.eye(n))
        else:
            for target in (X, S):
                g = rng.normal(size=(n, n))
                target.append(tau * (np.eye(n) + 0.5 * g @ g.T / n))
    y = np.zeros(nf)
    lam = np.zeros(m)
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.sqrt(sum(np.sum(c * c) for c in C) + cf @ cf)
    history = []
    status = Status.MAX_ITERATIONS
    it = 0
    gap = pinf = dinf = np.inf

    for it in range(settings.max_iter + 1):
        ATl = problem.at_op(lam)
        rp = b - problem.a_op(X) - F @ y
        Rd = [c - a - s for c, a, s in zip(C, ATl, S)]
        rf = cf - F.T @ lam
        pobj = _inner(C, X) + cf @ y
        dobj = b @ lam
        mu = _inner(X, S) / N
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        pinf = np.linalg.norm(rp) / bnorm
        dinf = np.sqrt(sum(np.sum(r * r) for r in Rd) + rf @ rf) / cnorm
        rec = {"iter": it, "pobj": float(pobj), "dobj": float(dobj), "gap": float(gap),
               "pinf": float(pinf), "dinf": float(dinf), "mu": float(mu)}
        history.append(rec)
        if trace is not None:
            trace(rec)
        if gap <= settings.gap_tol and pinf <= settings.feas_tol and dinf <= settings.feas_tol:
            status = Status.OPTIMAL
            break
        if dobj > settings.infeasible_bound and dinf <= 1e-6:
            status = Status.INFEASIBLE
            break
        if it == settings.max_iter:
            break

        try:
            step = _iterate(problem, X, y, lam, S, rp, Rd, rf, mu, pinf, gap, settings)
        except np.linalg.LinAlgError:
            # lost definiteness to round-off; report the last iterate as is
            break
        X, y, lam, S = step

    lam_full = np.zeros(full.n_constraints)
    lam_full[keep] = lam
    return SdpSolution(X, y, lam_full, S, float(pobj), float(dobj), status, it, float(gap),
                       float(pinf), float(dinf), dropped, history)


def _iterate(problem, X, y, lam, S, rp, Rd, rf, mu, pinf, gap, settings):
    """One Mehrotra predictor-corrector step."""
    F = problem.free_coeffs
    N = sum(problem.block_dims)
    Sinv = []
    for s in S:
        cs = sla.cho_factor(s, lower=True)
        Sinv.append(sla.cho_solve(cs, np.eye(len(s))))
    M = _schur(problem, X, Sinv)

    def newton(Rc):
        # Rc: complementarity target per block (sigma mu S^-1 - X [- dXp dSp S^-1])
        r1 = rp - problem.a_op([rc - x @ rd @ si for rc, x, rd, si in zip(Rc, X, Rd, Sinv)])
        dlam, dy = _kkt(M, F, r1, rf)
        dS = [rd - a for rd, a in zip(Rd, problem.at_op(dlam))]
        dX = []
        for rc, x, ds, si in zip(Rc, X, dS, Sinv):
            d = rc - x @ ds @ si
            dX.append(0.5 * (d + d.T))
        return dX, dy, dlam, dS

    # predictor
    Rc = [-x for x in X]
    dX, dy, dlam, dS = newton(Rc)
    ap = min(1.0, 0.98 * _max_step(X, dX))
    ad = min(1.0, 0.98 * _max_step(S, dS))
    mu_aff = _inner([x + ap * d for x, d in zip(X, dX)], [s + ad * d for s, d in zip(S, dS)]) / N
    sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
    if pinf > settings.feas_tol and pinf > 1e3 * gap:
        # complementarity is far ahead of feasibility; stay off the boundary
        sigma = max(sigma, 0.5)
    # corrector
    Rc = [sigma * mu * si - x - dxp @ dsp @ si
          for si, x, dxp, dsp in zip(Sinv, X, dX, dS)]
    dX, dy, dlam, dS = newton(Rc)
    ap = min(1.0, 0.98 * _max_step(X, dX))
    ad = min(1.0, 0.98 * _max_step(S, dS))
    X = [x + ap * d for x, d in zip(X, dX)]
    X = [0.5 * (x + x.T) for x in X]
    y = y + ap * dy
    lam = lam + ad * dlam
    S = [s + ad * d for s, d in zip(S, dS)]
    S = [0.5 * (s + s.T) for s in S]
    return X, y, lam, S


def _check_free(problem: SdpProblem):
    """Raise :class:`IllPosed` when the free variables have linearly dependent columns."""
    F = problem.free_coeffs
    if F.shape[1] == 0:
        return
    s = np.linalg.svd(F, compute_uv=False)
    if len(s) < F.shape[1] or s[-1] <= 1e-12 * max(1.0, s[0]):
        raise IllPosed("free variables are not determined by the constraints")


def _factor_spd(M):
    """Cholesky of the Schur matrix, retried with a tiny diagonal shift when it is
    numerically indefinite near the optimum (the caller refines the solution)."""
    shift = 0.0
    top = max(1.0, float(np.max(np.abs(np.diag(M))))) if M.size else 1.0
    for _ in range(4):
        try:
            return sla.cho_factor(M + shift * np.eye(len(M)), lower=True)
        except np.linalg.LinAlgError:
            shift = 1e-14 * top if shift == 0.0 else 100.0 * shift
    raise np.linalg.LinAlgError("Schur matrix is not positive definite")


def _kkt(M, F, r1, rf):
    """Solve ``[[M, F], [F^T, 0]] [dlam; dy] = [r1; rf]``."""
    cf = _factor_spd(M)

    def solve_m(r):
        return sla.cho_solve(cf, r)

    if F.shape[1] == 0:
        x = solve_m(r1)
        return x + solve_m(r1 - M @ x), np.zeros(0)
    MiF = solve_m(F)
    K = F.T @ MiF
    kf = sla.lu_factor(K)
    if not np.all(np.isfinite(kf[0])) or np.min(np.abs(np.diag(kf[0]))) <= 1e-14 * max(1.0, np.max(np.abs(K))):
        raise np.linalg.LinAlgError("reduced free-variable system is singular")

    def block_solve(a, c):
        mia = solve_m(a)
        dy = sla.lu_solve(kf, F.T @ mia - c)
        return mia - MiF @ dy, dy

    dlam, dy = block_solve(r1, rf)
    # one step of iterative refinement; the Schur matrix gets badly
    # conditioned near the optimum
    dlam2, dy2 = block_solve(r1 - M @ dlam - F @ dy, rf - F.T @ dlam)
    return dlam + dlam2, dy + dy2


# ---------------------------------------------------------------------------
# complex Hermitian layer
# ---------------------------------------------------------------------------


def embed_coo(rows, cols, vals, n: int):
    """COO image of a Hermitian matrix (both triangles listed) under the real embedding."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=complex)
    re, im = vals.real, vals.imag
    r_parts = [rows, rows + n]
    c_parts = [cols, cols + n]
    v_parts = [re, re]
    nz = im != 0
    if np.any(nz):
        r_parts += [rows[nz], rows[nz] + n]
        c_parts += [cols[nz] + n, cols[nz]]
        v_parts += [-im[nz], im[nz]]
    r = np.concatenate(r_parts)
    c = np.concatenate(c_parts)
    v = np.concatenate(v_parts)
    keep = v != 0
    return r[keep], c[keep], v[keep]


def unembed(Y: np.ndarray) -> np.ndarray:
    """Hermitian matrix represented by a real symmetric block of size 2n."""
    n = Y.shape[0] // 2
    return 0.5 * (Y[:n, :n] + Y[n:, n:]) + 0.5j * (Y[n:, :n] - Y[:n, n:])


def _hermitian_coo(h):
    if isinstance(h, tuple):
        return h
    h = np.asarray(h, dtype=complex)
    if la.hermitian_defect(h) > 1e-12:
        raise NotHermitian("coefficient matrix is not Hermitian")
    r, c = np.nonzero(h)
    return r, c, h[r, c]


class HermitianSdp:
    """Builder for programs over complex Hermitian PSD blocks.

    Each Hermitian block of size n is a real block of size 2n; a Hermitian
    coefficient ``H`` enters as ``embed(H) / 2`` so that inner products
    ``tr(H X)`` are preserved.
    """

    def __init__(self):
        self.builder = SdpBuilder()
        self.hdims = []

    def add_block(self, n: int) -> int:
        self.hdims.append(n)
        return self.builder.add_block(2 * n)

    def add_free(self, count: int = 1) -> int:
        return self.builder.add_free(count)

    def set_free_objective(self, idx: int, value: float):
        self.builder.free_obj[idx] = float(value)

    def set_objective(self, block: int, h):
        r, c, v = _hermitian_coo(h)
        n = self.hdims[block]
        er, ec, ev = embed_coo(r, c, v, n)
        dense = np.zeros((2 * n, 2 * n))
        np.add.at(dense, (er, ec), 0.5 * ev)
        self.builder.set_objective(block, dense)

    def add_constraint(self, terms: dict, rhs: float, free: dict | None = None) -> int:
        """``sum_blocks tr(H_b X_b) + sum_j f_j y_j = rhs`` with Hermitian ``H_b``.

        Each ``H_b`` is a dense matrix or ``(rows, cols, vals)`` listing both triangles.
        """
        real_terms = {}
        for block, h in terms.items():
            r, c, v = _hermitian_coo(h)
            er, ec, ev = embed_coo(r, c, v, self.hdims[block])
            real_terms[block] = (er, ec, 0.5 * ev)
        return self.builder.add_constraint(real_terms, rhs, free)

    def build(self) -> SdpProblem:
        return self.builder.build()

    def hermitian_blocks(self, sol: SdpSolution) -> list:
        return [unembed(x) for x in sol.X]

    def hermitian_duals(self, sol: SdpSolution) -> list:
        return [2.0 * unembed(s) for s in sol.S]
