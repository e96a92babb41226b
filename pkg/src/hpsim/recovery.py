"""Cheapest Hermitian-preserving post-processing that undoes noise on one observable.

Given noise ``N`` and observable ``O``, find ``D`` with
``tr[D(N(rho)) O] = tr[rho O]`` for every ``rho``, minimising the cost of
``D`` under either model.  Linearity in ``rho`` turns the condition into one
equation per element ``B_k`` of a Hermitian operator basis:

    tr[J^D (N(B_k)^T (x) O)] = tr[B_k O].
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from hpsim import linalg as la
from hpsim.cost import add_qpd_normalisation, add_tc_normalisation
from hpsim.errors import DimensionMismatch, InfeasibleRecovery, ParamOutOfRange, SolverFailure
from hpsim.maps import (MapRep, amplitude_damping, as_map, choi_from_kraus, dephasing,
                        depolarizing, is_cp, is_tp)
from hpsim.sdp import HermitianSdp, Status, solve
from hpsim.settings import DEFAULT, NumericSettings

FAMILIES = {
    "ad": lambda eps: choi_from_kraus(amplitude_damping(eps)),
    "deph": lambda eps: choi_from_kraus(dephasing(eps)),
    "depo": depolarizing,
}
DEFAULT_EPS = tuple(round(0.1 * k, 10) for k in range(10))


@dataclass(frozen=True, eq=False)
class RecoveryProblem:
    noise: MapRep
    observable: np.ndarray
    model: str = "tc"  # "tc" or "qpd"
    full_inverse: bool = False
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "noise", as_map(self.noise))
        object.__setattr__(self, "observable", la.as_cmatrix(self.observable))
        if self.model not in ("tc", "qpd"):
            raise ValueError(f"cost model must be 'tc' or 'qpd', got {self.model!r}")


@dataclass(eq=False)
class RecoverySolution:
    d_map: MapRep
    cost: float
    residual: float
    iterations: int = 0


def recovery_constraints(noise: MapRep, obs, full_inverse: bool = False):
    """``(H_k, r_k)`` pairs with ``tr[J^D H_k] = r_k`` encoding the recovery condition."""
    d_in, d_out = noise.dim_in, noise.dim_out
    outs = [obs] if not full_inverse else la.hermitian_basis(d_in)
    cons = []
    for b in la.hermitian_basis(d_in):
        nb = np.einsum("pq,pxqy->xy", b, noise.choi4())
        for o in outs:
            cons.append((np.kron(nb.T, o), float(np.real(np.trace(b @ o)))))
    return cons


def _residual(d_choi, cons) -> float:
    return max(abs(float(np.real(np.sum(h.T * d_choi))) - r) for h, r in cons)


def optimal_recovery(p: RecoveryProblem, settings: NumericSettings = DEFAULT,
                     trace=None) -> RecoverySolution:
    noise, obs = p.noise, p.observable
    name = p.label or f"{noise!r}"
    if not (is_cp(noise, settings.tol) and is_tp(noise, settings.tol)):
        raise ValueError("noise must be CPTP")
    if la.hermitian_defect(obs) > settings.tol:
        raise ValueError("observable must be Hermitian")
    if obs.shape != (noise.dim_in, noise.dim_in):
        raise DimensionMismatch(f"observable of shape {obs.shape} for a {noise.dim_in}-dim input")
    if not np.any(obs):
        raise ValueError("observable is zero")
    # D maps the noise output back to the noise input space
    da, db = noise.dim_out, noise.dim_in
    cons = recovery_constraints(noise, obs, p.full_inverse)
    sdp = HermitianSdp()
    mp, mm = sdp.add_block(da * db), sdp.add_block(da * db)
    for h, r in cons:
        h = 0.5 * (h + h.conj().T)
        sdp.add_constraint({mp: h, mm: -h}, r)
    if p.model == "tc":
        add_tc_normalisation(sdp, mp, mm, da, db)
    else:
        add_qpd_normalisation(sdp, mp, mm, da, db)
    sol = solve(sdp.build(), settings, trace=trace)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleRecovery(f"no Hermitian-preserving map recovers the observable through {name}")
    if not sol.optimal:
        raise SolverFailure(f"recovery SDP for {name} stopped with status {sol.status.value} "
                            f"(gap {sol.gap:.2e})")
    blocks = sdp.hermitian_blocks(sol)
    d_choi = blocks[mp] - blocks[mm]
    d_choi = 0.5 * (d_choi + d_choi.conj().T)
    cost = float(sol.y[0]) if p.model == "tc" else float(sol.y[0] + sol.y[1])
    return RecoverySolution(MapRep(da, db, d_choi), cost, _residual(d_choi, cons), sol.iterations)


def sweep_recovery(family: str, eps_grid=DEFAULT_EPS, obs=None,
                   settings: NumericSettings = DEFAULT, workers=None) -> list:
    """Rows ``{family, eps, cost_tc, cost_qpd, residual_tc, residual_qpd}`` in grid order."""
    if family not in FAMILIES:
        raise ValueError(f"unknown noise family {family!r}; known: {sorted(FAMILIES)}")
    if obs is None:
        obs = la.PAULI_X + la.PAULI_Y + la.PAULI_Z + la.PAULI_I
    for eps in eps_grid:
        if not 0.0 <= eps <= 1.0:
            raise ParamOutOfRange(f"noise level {eps} outside [0, 1]")

    def point(eps):
        noise = FAMILIES[family](eps)
        row = {"family": family, "eps": float(eps)}
        for model in ("tc", "qpd"):
            s = optimal_recovery(RecoveryProblem(noise, obs, model, label=f"{family}({eps:g})"),
                                 settings)
            row[f"cost_{model}"] = s.cost
            row[f"residual_{model}"] = s.residual
        return row

    if workers is None:
        workers = int(os.environ.get("HPSIM_THREADS", "1") or 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(point, eps_grid))
    return [point(e) for e in eps_grid]


SWEEP_COLUMNS = ("family", "eps", "cost_tc", "cost_qpd", "residual_tc", "residual_qpd")


def rows_to_csv(rows, columns=SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([f"{r[c]:.12g}" if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()
