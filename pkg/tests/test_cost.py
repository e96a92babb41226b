import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpsim import maps as qm
from hpsim.cost import (cost_report, diamond_variational, gamma_qpd, gamma_tc, robustness)
from hpsim.decompose import TwistedChannel
from hpsim.errors import NotHermitianPreserving
from hpsim.maps import KrausSet

TOL = 1e-7


def watrous_diamond(e):
    """Diamond norm by the standard maximisation SDP (independent formulation)."""
    cp = pytest.importorskip("cvxpy")
    da, db = e.dim_in, e.dim_out
    n = da * db
    Xv = cp.Variable((n, n), complex=True)
    r0 = cp.Variable((da, da), hermitian=True)
    r1 = cp.Variable((da, da), hermitian=True)
    big = cp.bmat([[cp.kron(r0, np.eye(db)), Xv], [Xv.H, cp.kron(r1, np.eye(db))]])
    cons = [0.5 * (big + big.H) >> 0, cp.real(cp.trace(r0)) == 1, cp.real(cp.trace(r1)) == 1]
    obj = cp.Maximize(cp.real(cp.trace(e.choi.conj().T @ Xv)))
    prob = cp.Problem(obj, cons)
    prob.solve(solver="CLARABEL")
    return prob.value


def test_watrous_oracle_sanity():
    assert watrous_diamond(qm.identity_map(2)) == pytest.approx(1.0, abs=1e-6)
    assert watrous_diamond(qm.transpose_map(2)) == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("m, tc, qpd", [
    (qm.identity_map(2), 1.0, 1.0),
    (qm.transpose_map(2), 2.0, 2.0),
    (qm.parity_sign_map(), 1.0, 2.0),
    (qm.transpose_map(3), 3.0, 3.0),
])
def test_reference_costs(m, tc, qpd):
    assert gamma_tc(m).value == pytest.approx(tc, abs=TOL)
    assert gamma_qpd(m).value == pytest.approx(qpd, abs=TOL)


def test_random_maps_against_watrous(rng):
    for d_in, d_out in [(2, 2), (2, 3), (3, 2)]:
        e = qm.random_hp_map(d_in, d_out, rng)
        assert gamma_tc(e).value == pytest.approx(watrous_diamond(e), abs=1e-6)


def test_variational_bound(rng):
    for _ in range(3):
        e = qm.random_hp_map(2, 2, rng)
        tc = gamma_tc(e).value
        var = diamond_variational(e, restarts=50, rng_seed=1)
        assert var <= tc + 1e-8
        assert var == pytest.approx(tc, abs=1e-4)


def test_variational_examples():
    assert diamond_variational(qm.identity_map(2), restarts=3) == pytest.approx(1.0, abs=1e-10)
    assert diamond_variational(qm.transpose_map(2), restarts=100) >= 2 - 1e-6
    assert diamond_variational(qm.zero_map(2), restarts=3) == 0.0


def test_robustness_examples():
    assert robustness(qm.depolarizing(0.4)) == pytest.approx(0.0, abs=TOL)
    assert robustness(qm.transpose_map(2)) == pytest.approx(0.5, abs=TOL)
    assert robustness(qm.parity_sign_map()) == pytest.approx(0.0, abs=TOL)


def test_robustness_mixture_is_twisted(rng):
    # (E + s(-T)) / (1 + s) with T = E / gamma is a twisted channel of scale <= 1
    e = qm.random_hp_map(2, 2, rng)
    g = gamma_tc(e).value
    s = robustness(e)
    mix = (1.0 / (1 + s)) * (e - (s / g) * e)
    assert gamma_tc(mix).value <= 1 + 1e-6


@pytest.mark.parametrize("eps", [0.0, 0.3, 0.7, 1.0])
def test_channels_cost_one(eps):
    for m in (qm.choi_from_kraus(qm.amplitude_damping(eps)), qm.choi_from_kraus(qm.dephasing(eps)),
              qm.depolarizing(eps)):
        assert gamma_tc(m).value == pytest.approx(1.0, abs=TOL)
        assert gamma_qpd(m).value == pytest.approx(1.0, abs=TOL)


def test_random_channel_costs_one(rng):
    m = qm.choi_from_kraus(qm.random_cptp(3, 2, rng))
    assert gamma_tc(m).value == pytest.approx(1.0, abs=TOL)
    assert gamma_qpd(m).value == pytest.approx(1.0, abs=TOL)


def test_sandwich_and_certificates(rng):
    e = qm.random_hp_map(2, 2, rng)
    tc, q = gamma_tc(e), gamma_qpd(e)
    assert tc.value <= q.value + TOL
    assert q.value <= 2 * tc.value + TOL
    assert np.allclose(tc.m_plus - tc.m_minus, e.choi, atol=1e-7)
    assert np.allclose(q.m_plus - q.m_minus, e.choi, atol=1e-7)
    assert q.a + q.b == pytest.approx(q.value)


@pytest.mark.parametrize("c", [-2.0, 0.5, 3.0])
def test_homogeneity(c, rng):
    e = qm.random_hp_map(2, 2, rng)
    assert gamma_tc(c * e).value == pytest.approx(abs(c) * gamma_tc(e).value, rel=1e-7)


def test_triangle_inequality(rng):
    a, b = qm.random_hp_map(2, 2, rng), qm.random_hp_map(2, 2, rng)
    assert gamma_tc(a + b).value <= gamma_tc(a).value + gamma_tc(b).value + TOL


def test_hand_built_twisted_channel_costs_at_most_its_scale(rng):
    k = qm.random_cptp(2, 2, rng, rank=2)
    t = TwistedChannel(1.5, ((1, KrausSet(2, 2, k.kraus[:1])), (-1, KrausSet(2, 2, k.kraus[1:]))))
    assert gamma_tc(t.effective_map()).value <= 1.5 + TOL


def test_not_hermitian_preserving():
    bad = qm.MapRep(2, 2, np.diag([1j, 0, 0, 0]))
    with pytest.raises(NotHermitianPreserving):
        gamma_tc(bad)
    with pytest.raises(NotHermitianPreserving):
        gamma_qpd(bad)


def test_cost_report():
    rep = cost_report(qm.transpose_map(2), restarts=20)
    d = rep.as_dict()
    assert d["gamma_tc"] == pytest.approx(2.0, abs=TOL)
    assert d["gamma_qpd"] == pytest.approx(2.0, abs=TOL)
    assert d["diamond_independent"] == pytest.approx(2.0, abs=1e-6)
    assert d["robustness"] == pytest.approx(0.5, abs=TOL)
    assert set(rep.certificates) == {"tc", "qpd"}
    assert cost_report(qm.identity_map(2), ("qpd",)).as_dict().keys() == {"gamma_qpd"}


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_variational_never_exceeds_sdp(seed):
    e = qm.random_hp_map(2, 2, np.random.default_rng(seed))
    assert diamond_variational(e, restarts=5, rng_seed=seed) <= gamma_tc(e).value + 1e-8
