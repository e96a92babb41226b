import numpy as np
import pytest
from scipy.optimize import linprog

from hpsim import linalg as la
from hpsim import sdp
from hpsim.cost import tc_program
from hpsim.errors import IllPosed
from hpsim.maps import depolarizing, identity_map, random_hp_map
from hpsim.settings import DEFAULT

from conftest import random_hermitian


def _unit(n, i, j):
    e = np.zeros((n, n))
    e[i, j] = e[j, i] = 1.0 if i == j else 0.5
    return e


def test_min_trace_with_fixed_corner():
    p = sdp.SdpProblem.from_dense([2], [np.eye(2)], [[_unit(2, 0, 0)]], [1.0])
    sol = sdp.solve(p)
    assert sol.optimal
    assert sol.primal_objective == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(sol.X[0], np.diag([1.0, 0.0]), atol=1e-7)


def test_operator_norm_as_sdp():
    # min mu  s.t.  mu I - diag(1, 3) = S >= 0, written with a free scalar
    b = sdp.SdpBuilder()
    blk = b.add_block(2)
    mu = b.add_free()
    b.free_obj[mu] = 1.0
    a = np.diag([1.0, 3.0])
    for i in range(2):
        for j in range(i, 2):
            b.add_constraint({blk: _unit(2, i, j)}, -a[i, j] if i == j else 0.0,
                             {mu: -1.0 if i == j else 0.0})
    sol = sdp.solve(b.build())
    assert sol.optimal and sol.y[0] == pytest.approx(3.0, abs=1e-7)


def test_lp_against_linprog(rng):
    # diagonal 1x1 blocks turn the SDP into an LP; scipy's HiGHS is the oracle
    for _ in range(5):
        n, m = 6, 3
        A = rng.normal(size=(m, n))
        x0 = rng.random(n)
        b = A @ x0
        c = rng.random(n) + 0.1
        p = sdp.SdpProblem.from_dense([1] * n, [np.array([[ci]]) for ci in c],
                                      [[np.array([[A[i, k]]]) for k in range(n)] for i in range(m)], b)
        sol = sdp.solve(p)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
        assert sol.optimal
        assert sol.primal_objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-8)


def test_random_sdp_against_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    n, m = 4, 5
    mats = []
    for _ in range(m):
        g = rng.normal(size=(n, n))
        mats.append(0.5 * (g + g.T))
    x0 = rng.normal(size=(n, n))
    x0 = x0 @ x0.T + np.eye(n)
    b = np.array([np.sum(a * x0) for a in mats])
    g = rng.normal(size=(n, n))
    C = g @ g.T + np.eye(n)
    sol = sdp.solve(sdp.SdpProblem.from_dense([n], [C], [[a] for a in mats], b))
    X = cp.Variable((n, n), symmetric=True)
    prob = cp.Problem(cp.Minimize(cp.trace(C @ X)),
                      [X >> 0] + [cp.trace(a @ X) == bi for a, bi in zip(mats, b)])
    prob.solve(solver="CLARABEL")
    assert sol.optimal
    assert sol.primal_objective == pytest.approx(prob.value, rel=1e-6)


def test_solution_invariants(rng):
    p = tc_program(random_hp_map(2, 2, rng))[0].build()
    sol = sdp.solve(p)
    assert sol.optimal
    assert abs(sol.primal_objective - sol.dual_objective) <= DEFAULT.gap_tol * (1 + abs(sol.primal_objective))
    assert sol.primal_residual <= DEFAULT.feas_tol and sol.dual_residual <= DEFAULT.feas_tol
    for x in sol.X:
        assert np.linalg.eigvalsh(x).min() >= -DEFAULT.feas_tol


def test_weak_duality_on_near_feasible_iterates(rng):
    # the dual bound only applies once both residuals are small
    p = tc_program(random_hp_map(2, 2, rng))[0].build()
    hist = []
    sdp.solve(p, trace=hist.append)
    checked = 0
    for rec in hist:
        if rec["pinf"] <= 1e-9 and rec["dinf"] <= 1e-9:
            assert rec["dobj"] <= rec["pobj"] + DEFAULT.gap_tol
            checked += 1
    assert checked >= 1


def test_random_starting_points_agree(rng):
    p = tc_program(random_hp_map(2, 2, rng))[0].build()
    ref = sdp.solve(p).primal_objective
    for seed in range(3):
        sol = sdp.solve(p, init_seed=seed)
        assert sol.optimal
        assert sol.primal_objective == pytest.approx(ref, abs=10 * DEFAULT.gap_tol * (1 + abs(ref)))


@pytest.mark.parametrize("c", [0.5, 2.0, 7.0])
def test_objective_homogeneity(c, rng):
    p = tc_program(random_hp_map(2, 2, rng))[0].build()
    base = sdp.solve(p).primal_objective
    scaled = sdp.solve(p.scaled(c)).primal_objective
    assert scaled == pytest.approx(c * base, rel=1e-7)


def test_inconsistent_constraints_are_infeasible():
    e = _unit(2, 0, 0)
    p = sdp.SdpProblem.from_dense([2], [np.eye(2)], [[e], [e]], [1.0, 2.0])
    sol = sdp.solve(p)
    assert sol.status is sdp.Status.INFEASIBLE


def test_redundant_constraints_are_dropped():
    e = _unit(2, 0, 0)
    p = sdp.SdpProblem.from_dense([2], [np.eye(2)], [[e], [2 * e]], [1.0, 2.0])
    sol = sdp.solve(p)
    assert sol.optimal and len(sol.dropped_constraints) == 1
    assert sol.primal_objective == pytest.approx(1.0, abs=1e-8)


def test_psd_infeasible_is_detected():
    # X00 = -1 with X >= 0 is consistent linearly but infeasible in the cone
    p = sdp.SdpProblem.from_dense([2], [np.eye(2)], [[_unit(2, 0, 0)]], [-1.0])
    sol = sdp.solve(p)
    assert not sol.optimal


def test_duplicate_free_columns_are_ill_posed():
    b = sdp.SdpBuilder()
    blk = b.add_block(1)
    y = b.add_free(2)
    b.free_obj[y] = b.free_obj[y + 1] = 1.0
    b.add_constraint({blk: np.eye(1)}, 1.0, {y: 1.0, y + 1: 1.0})
    with pytest.raises(IllPosed):
        sdp.solve(b.build())


def test_embed_examples():
    h = np.array([[1.0, 2.0], [2.0, -1.0]])
    assert np.allclose(la.embed_hermitian(h), np.block([[h, 0 * h], [0 * h, h]]))
    ey = la.embed_hermitian(la.PAULI_Y)
    assert np.allclose(ey, [[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]])
    assert np.allclose(np.sort(np.linalg.eigvalsh(ey)), [-1, -1, 1, 1])
    assert la.psd_check(la.embed_hermitian(depolarizing(0.5).choi))


def test_embed_preserves_psd_and_norm(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        h = random_hermitian(n, rng)
        if rng.random() < 0.5:
            h = h @ h  # PSD sample
        e = la.embed_hermitian(h)
        w, we = np.linalg.eigvalsh(h), np.linalg.eigvalsh(e)
        assert abs(np.abs(w).max() - np.abs(we).max()) <= 1e-10 * max(1, np.abs(w).max())
        assert (w.min() >= -1e-12) == (we.min() >= -1e-12)


def test_unembed_inverts_embedding(rng):
    h = random_hermitian(3, rng)
    assert np.allclose(sdp.unembed(la.embed_hermitian(h)), h)


def test_hermitian_layer_identity_tc():
    prog, mp, mm = tc_program(identity_map(2))
    sol = sdp.solve(prog.build())
    assert sol.optimal and sol.y[0] == pytest.approx(1.0, abs=1e-7)
    blocks = prog.hermitian_blocks(sol)
    g = la.gamma_vector(2)
    assert np.allclose(blocks[mp], np.outer(g, g), atol=1e-6)
    assert np.allclose(blocks[mm], 0, atol=1e-6)
