"""Shot-by-shot execution of the two estimation protocols, plus shot planning.

``run_qpd``   samples a term ``j`` with probability ``|alpha_j| / gamma``,
              runs the CPTN map ``N_j`` (which may fail), measures the
              observable and reports ``sgn(alpha_j) * gamma * outcome``; a
              failed run reports 0, which keeps the estimator unbiased.
``run_mcpp``  runs one instrument, and reports ``sign_j * scale * outcome``
              for the observed branch ``j``.

Every shot draws its three uniforms from a counter-based Philox stream at
counter value = shot index, so results do not depend on chunking or on the
number of worker threads.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from hpsim import linalg as la
from hpsim._backend import kernels
from hpsim.decompose import QpdDecomposition, TwistedChannel
from hpsim.errors import DimensionMismatch, IncompleteInstrument, NotDensityMatrix, ParamOutOfRange
from hpsim.maps import apply
from hpsim.settings import DEFAULT, NumericSettings

_CHUNK = 1 << 16


@dataclass(frozen=True)
class ShotPlan:
    delta: float
    eps: float
    obs_norm: float
    K: float
    overhead: float
    shots: int


def plan_shots(delta: float, eps: float, obs, overhead: float) -> ShotPlan:
    """Hoeffding shot count ``ceil(overhead^2 * 2 ||O||^2 ln(2/delta) / eps^2)``."""
    if not 0.0 < delta < 1.0:
        raise ParamOutOfRange(f"delta must lie in (0, 1), got {delta}")
    if not eps > 0.0:
        raise ParamOutOfRange(f"eps must be positive, got {eps}")
    if not overhead >= 0.0:
        raise ParamOutOfRange(f"overhead must be non-negative, got {overhead}")
    norm = obs if np.isscalar(obs) else la.op_norm(la.as_cmatrix(obs))
    K = 2.0 * norm ** 2 * math.log(2.0 / delta) / eps ** 2
    shots = max(1, math.ceil(overhead ** 2 * K))
    return ShotPlan(float(delta), float(eps), float(norm), K, float(overhead), shots)


@dataclass
class EstimateResult:
    mean: float
    shots: int
    variance: float  # unbiased per-shot sample variance
    seed: int
    exact: float  # tr[E(rho) O] from the effective map
    overhead: float
    protocol: str
    values: np.ndarray | None = field(default=None, repr=False)
    branches: np.ndarray | None = field(default=None, repr=False)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.shots)

    @property
    def error(self) -> float:
        return abs(self.mean - self.exact)

    def as_dict(self) -> dict:
        return {"protocol": self.protocol, "mean": self.mean, "shots": self.shots,
                "variance": self.variance, "std_error": self.std_error, "seed": self.seed,
                "exact": self.exact, "abs_error": self.error, "overhead": self.overhead}


# ---------------------------------------------------------------------------
# validation and probability bookkeeping
# ---------------------------------------------------------------------------


def check_density_matrix(rho, settings: NumericSettings = DEFAULT) -> np.ndarray:
    rho = la.as_cmatrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise NotDensityMatrix(f"state is not square: {rho.shape}")
    if la.hermitian_defect(rho) > settings.tol:
        raise NotDensityMatrix("state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > settings.tol:
        raise NotDensityMatrix(f"state has trace {np.trace(rho).real:.12g}")
    if not la.psd_check(0.5 * (rho + rho.conj().T), settings.tol):
        raise NotDensityMatrix("state has a negative eigenvalue")
    return 0.5 * (rho + rho.conj().T)


def _normalise(p, tol, what="probabilities"):
    p = np.clip(np.real(np.asarray(p, dtype=float)), 0.0, 1.0)
    total = float(np.sum(p))
    if abs(total - 1.0) > tol:
        raise ValueError(f"{what} sum to {total:.12g}")
    return p / total


def observable_spectrum(obs, settings: NumericSettings = DEFAULT):
    """Distinct eigenvalues of ``obs`` (clusters within ``degen_tol`` merged) and their projectors."""
    eig = la.eig_hermitian(obs, settings.tol)
    w, v = eig.eigenvalues, eig.eigenvectors
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    vals, projs = [], []
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[start] - w[stop] <= settings.degen_tol * scale:
            stop += 1
        block = v[:, start:stop]
        vals.append(float(np.mean(w[start:stop])))
        projs.append(block @ block.conj().T)
        start = stop
    return np.array(vals), projs


def _outcome_probs(state, projs, settings):
    """Born probabilities of the observable's eigenspaces for a (normalised) state."""
    p = [float(np.real(np.sum(pr.T * state))) for pr in projs]
    return _normalise(p, settings.prob_tol, "eigenspace probabilities")


class _Tree:
    """Three-stage outcome tree with a value attached to every leaf."""

    def __init__(self, stage1, stage2, stage3, leaf_values):
        n1 = len(stage1)
        n2 = np.array([len(s) for s in stage2], dtype=np.int64)
        n3max = max(len(x) for s in stage3 for x in s)
        self.cdf1 = np.cumsum(stage1)
        self.cdf1[-1] = np.inf
        self.cdf2 = np.full((n1, int(n2.max())), np.inf)
        self.cdf3 = np.full((n1, int(n2.max()), n3max), np.inf)
        self.n2 = n2
        self.n3 = np.ones((n1, int(n2.max())), dtype=np.int64)
        self.values = np.zeros((n1, int(n2.max()), n3max))
        self.raw = np.full((n1, int(n2.max()), n3max), np.nan)
        for a in range(n1):
            c = np.cumsum(stage2[a])
            c[-1] = np.inf
            self.cdf2[a, :len(c)] = c
            for b, p3 in enumerate(stage3[a]):
                c = np.cumsum(p3)
                c[-1] = np.inf
                self.cdf3[a, b, :len(c)] = c
                self.n3[a, b] = len(c)
                vals, raw = leaf_values[a][b]
                self.values[a, b, :len(c)] = vals
                self.raw[a, b, :len(c)] = raw

    def sample(self, u):
        idx = kernels.sample_tree(np.ascontiguousarray(u), self.cdf1, self.cdf2, self.cdf3,
                                  self.n2, self.n3)
        return idx


def _uniforms(key, start: int, count: int) -> np.ndarray:
    """Three uniforms per shot from Philox block ``start + i`` (53-bit resolution)."""
    bg = np.random.Philox(key=key, counter=np.array([start, 0, 0, 0], dtype=np.uint64))
    raw = bg.random_raw(4 * count).reshape(count, 4)[:, :3]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)


def _workers(workers):
    if workers is None:
        workers = int(os.environ.get("HPSIM_THREADS", "1") or 1)
    return max(1, int(workers))


def _run(tree: _Tree, shots: int, seed: int, workers, keep_values: bool, trace_path):
    if shots < 1:
        raise ParamOutOfRange("need at least one shot")
    key = _philox_key(seed)
    starts = list(range(0, shots, _CHUNK))

    def chunk(s):
        n = min(_CHUNK, shots - s)
        return tree.sample(_uniforms(key, s, n))

    w = _workers(workers)
    if w > 1 and len(starts) > 1:
        with ThreadPoolExecutor(w) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    idx = np.concatenate(parts)
    a, b, c = idx[:, 0], idx[:, 1], idx[:, 2]
    values = tree.values[a, b, c]
    mean = math.fsum(values) / shots
    var = math.fsum((values - mean) ** 2) / (shots - 1) if shots > 1 else 0.0
    if trace_path is not None:
        write_trace(trace_path, a, tree.raw[a, b, c], values)
    return mean, var, (values if keep_values else None), (a if keep_values else None)


def write_trace(path, branch, raw, weighted):
    """Per-shot CSV: shot_index, branch, raw_eigenvalue (blank on failure), weighted_value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shot_index", "branch", "raw_eigenvalue", "weighted_value"])
        for i, (j, r, v) in enumerate(zip(branch, raw, weighted)):
            w.writerow([i, int(j), "" if np.isnan(r) else f"{r:.12g}", f"{v:.12g}"])


def _prepare(dim_in, dim_out, rho, obs, settings):
    rho = check_density_matrix(rho, settings)
    obs = la.as_cmatrix(obs)
    if rho.shape[0] != dim_in:
        raise DimensionMismatch(f"state has dimension {rho.shape[0]}, map expects {dim_in}")
    if obs.shape != (dim_out, dim_out):
        raise DimensionMismatch(f"observable has shape {obs.shape}, map outputs {dim_out}")
    eigvals, projs = observable_spectrum(obs, settings)
    return rho, obs, eigvals, projs


def _exact(effective, rho, obs) -> float:
    return float(np.real(np.trace(apply(effective, rho) @ obs)))


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------


def run_qpd(d: QpdDecomposition, rho, obs, shots: int, seed: int = 0, *,
            settings: NumericSettings = DEFAULT, workers=None, keep_values: bool = False,
            trace_path=None) -> EstimateResult:
    """Quasi-probability sampling of ``sum_j alpha_j N_j``."""
    rho, obs, eigvals, projs = _prepare(d.dim_in, d.dim_out, rho, obs, settings)
    gamma = d.gamma
    alphas = np.array([a for a, _ in d.terms])
    if gamma > 0:
        p1 = _normalise(np.abs(alphas) / gamma, settings.prob_tol, "term weights")
    else:
        p1 = np.full(len(alphas), 1.0 / len(alphas))
    stage2, stage3, leaves = [], [], []
    for alpha, k in d.terms:
        out = k.apply(rho)
        ps = min(1.0, max(0.0, float(np.real(np.trace(out)))))
        coeff = float(np.sign(alpha)) * gamma
        stage2.append(np.array([ps, 1.0 - ps]))
        if ps > 0.0:
            p3 = _outcome_probs(out / ps, projs, settings)
        else:
            p3 = np.full(len(eigvals), 1.0 / len(eigvals))
        # branch 0 = success (measure), branch 1 = failure (value 0)
        stage3.append([p3, np.array([1.0])])
        leaves.append([(coeff * eigvals, eigvals), (np.zeros(1), np.full(1, np.nan))])
    tree = _Tree(p1, stage2, stage3, leaves)
    mean, var, values, branches = _run(tree, shots, seed, workers, keep_values, trace_path)
    return EstimateResult(mean, shots, var, seed, _exact(d.effective_map(), rho, obs), gamma,
                          "qpd", values, branches)


def run_mcpp(t: TwistedChannel, rho, obs, shots: int, seed: int = 0, *,
             settings: NumericSettings = DEFAULT, workers=None, keep_values: bool = False,
             trace_path=None) -> EstimateResult:
    """Measurement-controlled post-processing of a scaled twisted channel."""
    rho, obs, eigvals, projs = _prepare(t.dim_in, t.dim_out, rho, obs, settings)
    outs = [k.apply(rho) for _, k in t.branches]
    p = np.clip(np.array([float(np.real(np.trace(o))) for o in outs]), 0.0, 1.0)
    total = float(np.sum(p))
    if total < 1.0 - settings.tol or total > 1.0 + settings.tol:
        raise IncompleteInstrument(f"branch probabilities sum to {total:.12g}")
    p1 = p / total
    stage2, stage3, leaves = [], [], []
    for (sign, _), o, pj in zip(t.branches, outs, p):
        stage2.append(np.array([1.0]))
        if pj > 0.0:
            stage3.append([_outcome_probs(o / pj, projs, settings)])
        else:
            stage3.append([np.full(len(eigvals), 1.0 / len(eigvals))])
        leaves.append([(sign * t.scale * eigvals, eigvals)])
    tree = _Tree(p1, stage2, stage3, leaves)
    mean, var, values, branches = _run(tree, shots, seed, workers, keep_values, trace_path)
    return EstimateResult(mean, shots, var, seed, _exact(t.effective_map(), rho, obs), t.scale,
                          "mcpp", values, branches)
