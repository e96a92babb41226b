import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpsim import maps as qm
from hpsim.cost import gamma_qpd, gamma_tc
from hpsim.decompose import (QpdDecomposition, TwistedChannel, combine_twisted, hp_to_twisted,
                             qpd_from_certificate, twisted_from_certificate, zero_twisted)
from hpsim.errors import InvalidCertificate, NotHermitianPreserving
from hpsim.maps import KrausSet
from hpsim import linalg as la

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def _same_map(k: KrausSet, ref: qm.MapRep, tol=1e-7):
    return qm.maps_close(qm.choi_from_kraus(k), ref, tol)


def _twisted(e):
    r = gamma_tc(e)
    return twisted_from_certificate(e, r.m_plus, r.m_minus, r.value), r.value


def _qpd(e):
    r = gamma_qpd(e)
    return qpd_from_certificate(e, r.m_plus, r.m_minus, r.a, r.b), r.value


def test_identity_exact_certificate():
    e = qm.identity_map(2)
    g = la.gamma_vector(2)
    t = twisted_from_certificate(e, np.outer(g, g), np.zeros((4, 4)), 1.0)
    assert t.scale == pytest.approx(1.0, abs=1e-12) and len(t.branches) == 1 and t.branches[0][0] == 1
    assert _same_map(t.branches[0][1], e, 1e-12)


def test_parity_sign_twisted():
    e = qm.parity_sign_map()
    t, _ = _twisted(e)
    assert t.scale == pytest.approx(1.0, abs=1e-7)
    assert [s for s, _ in t.branches] == [1, -1]
    p0 = qm.choi_from_kraus(KrausSet(2, 2, (P0,)))
    p1 = qm.choi_from_kraus(KrausSet(2, 2, (P1,)))
    assert _same_map(t.branches[0][1], p0) and _same_map(t.branches[1][1], p1)
    assert t.check(e) == []


def test_transpose_twisted():
    e = qm.transpose_map(2)
    t, g = _twisted(e)
    assert t.scale == pytest.approx(2.0, abs=1e-7)
    assert t.check(e) == []
    for _, k in t.branches:
        assert k.is_tni()


def test_random_certificates(rng):
    for dims in [(2, 2), (2, 3), (3, 3)]:
        e = qm.random_hp_map(*dims, rng)
        t, g = _twisted(e)
        assert t.check(e) == [] and t.scale == pytest.approx(g, abs=1e-7)
        d, gq = _qpd(e)
        assert d.check(e) == [] and d.gamma == pytest.approx(gq, abs=1e-7)


def test_qpd_examples():
    d, _ = _qpd(qm.identity_map(2))
    assert len(d.terms) == 1 and d.terms[0][0] == pytest.approx(1.0, abs=1e-7)
    assert _same_map(d.terms[0][1], qm.identity_map(2))
    d, _ = _qpd(qm.parity_sign_map())
    alphas = [a for a, _ in d.terms]
    assert alphas == pytest.approx([1.0, -1.0], abs=1e-7) and d.gamma == pytest.approx(2.0, abs=1e-7)
    assert _same_map(d.terms[0][1], qm.choi_from_kraus(KrausSet(2, 2, (P0,))))
    half = 0.5 * qm.identity_map(2)
    d, _ = _qpd(half)
    assert len(d.terms) == 1 and d.gamma == pytest.approx(0.5, abs=1e-7)
    assert _same_map(d.terms[0][1], qm.identity_map(2))


def test_bad_certificates():
    e = qm.identity_map(2)
    g = la.gamma_vector(2)
    with pytest.raises(InvalidCertificate):
        twisted_from_certificate(e, np.eye(4), np.zeros((4, 4)), 1.0)
    with pytest.raises(InvalidCertificate):
        twisted_from_certificate(e, np.outer(g, g), np.zeros((4, 4)), 2.0)
    with pytest.raises(InvalidCertificate):
        twisted_from_certificate(e, np.outer(g, g) - np.diag([0, 0.1, 0, 0]),
                                 -np.diag([0, 0.1, 0, 0]), 1.0)
    with pytest.raises(InvalidCertificate):
        qpd_from_certificate(e, np.outer(g, g), np.zeros((4, 4)), 0.5, 0.0)


def _random_twisted(rng, scale=None):
    k = qm.random_cptp(2, 2, rng, rank=3)
    ops = k.kraus
    return TwistedChannel(float(rng.random() * 2) if scale is None else scale,
                          ((1, KrausSet(2, 2, ops[:1])), (-1, KrausSet(2, 2, ops[1:]))))


def test_combine_examples(rng):
    t = _random_twisted(rng, 1.0)
    c = combine_twisted([(2.0, t)])
    assert c.scale == 2.0 and qm.maps_close(c.effective_map(), 2.0 * t.effective_map())
    c = combine_twisted([(1.0, t), (-1.0, t)])
    assert c.scale == 2.0 and np.allclose(c.effective_map().choi, 0, atol=1e-12)
    t1, t2 = _random_twisted(rng, 1.0), _random_twisted(rng, 1.0)
    c = combine_twisted([(0.5, t1), (0.5, t2)])
    assert c.scale == 1.0 and c.completeness_defect() < 1e-12
    assert qm.maps_close(c.effective_map(), 0.5 * t1.effective_map() + 0.5 * t2.effective_map(), 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_combine_preserves_map_and_overhead(seed):
    rng = np.random.default_rng(seed)
    terms = [(float(rng.normal()), _random_twisted(rng)) for _ in range(3)]
    c = combine_twisted(terms)
    target = sum((a * t.effective_map() for a, t in terms[1:]), terms[0][0] * terms[0][1].effective_map())
    assert np.linalg.norm(c.effective_map().choi - target.choi) <= 1e-9
    assert c.scale == pytest.approx(sum(abs(a) * t.scale for a, t in terms), rel=1e-15)
    assert c.completeness_defect() <= 1e-9


def test_hp_to_twisted(rng):
    ch = qm.choi_from_kraus(qm.random_cptp(2, 2, rng))
    t = hp_to_twisted(ch)
    assert 1 - 1e-9 <= t.scale <= 2 + 1e-9 and t.check(ch) == []
    tr = hp_to_twisted(qm.transpose_map(2))
    assert tr.scale >= 2 - 1e-9 and tr.check(qm.transpose_map(2)) == []
    z = hp_to_twisted(qm.zero_map(2))
    assert np.allclose(z.effective_map().choi, 0) and z.completeness_defect() < 1e-12
    e = qm.random_hp_map(3, 2, rng)
    t = hp_to_twisted(e)
    assert t.check(e) == [] and t.scale >= gamma_tc(e).value - 1e-7
    with pytest.raises(NotHermitianPreserving):
        hp_to_twisted(qm.MapRep(2, 2, np.diag([1j, 0, 0, 0])))


def test_zero_map_certificate():
    z = qm.zero_map(2)
    t = twisted_from_certificate(z, np.zeros((4, 4)), np.zeros((4, 4)), 0.0)
    assert t.scale == 0.0 and t.completeness_defect() < 1e-12
    assert t == t and zero_twisted(2, 2).scale == 0.0


def test_invariant_checker_flags_problems():
    bad = TwistedChannel(1.0, ((1, KrausSet(2, 2, (P0,))),))
    assert any("complete" in p for p in bad.check())
    q = QpdDecomposition(((1.0, KrausSet(2, 2, (2 * P0,))),))
    assert any("trace-non-increasing" in p for p in q.check())
    good = TwistedChannel(1.0, ((1, KrausSet(2, 2, (P0,))), (-1, KrausSet(2, 2, (P1,)))))
    assert good.check(qm.parity_sign_map()) == []
    assert good.check(qm.identity_map(2)) == ["effective map differs from the target"]


def test_structural_validation():
    with pytest.raises(ValueError):
        TwistedChannel(-1.0, ((1, KrausSet(2, 2, (P0,))),))
    with pytest.raises(ValueError):
        TwistedChannel(1.0, ((2, KrausSet(2, 2, (P0,))),))
    with pytest.raises(ValueError):
        QpdDecomposition(())
