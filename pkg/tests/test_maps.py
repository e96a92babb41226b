import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpsim import linalg as la
from hpsim import maps as qm
from hpsim.errors import DimensionMismatch, InvalidSpec, NotCP, ParamOutOfRange

from conftest import PLUS, X, Y, Z, I2


def _kraus_apply(ops, rho):
    return sum(k @ rho @ k.conj().T for k in ops)


def _choi_by_definition(f, d_in):
    # J = sum_jk |j><k| (x) f(|j><k|)
    return sum(np.kron(la.ketbra(j, k, d_in), f(la.ketbra(j, k, d_in)))
               for j in range(d_in) for k in range(d_in))


def test_identity_choi_is_gamma_projector():
    m = qm.choi_from_kraus(qm.KrausSet(2, 2, (np.eye(2),)))
    g = la.gamma_vector(2)
    assert np.allclose(m.choi, np.outer(g, g))
    assert np.linalg.matrix_rank(m.choi) == 1 and np.trace(m.choi).real == pytest.approx(2)


def test_choi_matches_definition(rng):
    k = qm.random_cptp(2, 3, rng)
    ref = _choi_by_definition(lambda e: _kraus_apply(k.kraus, e), 2)
    assert np.allclose(qm.choi_from_kraus(k).choi, ref)


def test_fully_damped_choi():
    m = qm.choi_from_kraus(qm.amplitude_damping(1.0))
    assert np.allclose(m.choi, np.kron(np.eye(2), np.diag([1.0, 0.0])))


def test_full_dephasing_choi():
    m = qm.choi_from_kraus(qm.dephasing(1.0))
    assert np.allclose(m.choi, np.diag([1.0, 0, 0, 1.0]))


def test_kraus_from_identity_choi():
    k = qm.kraus_from_choi(qm.identity_map(2))
    assert len(k.kraus) == 1
    op = k.kraus[0]
    phase = op[0, 0] / abs(op[0, 0])
    assert np.allclose(op / phase, np.eye(2))


def test_kraus_from_depolarizing_choi():
    k = qm.kraus_from_choi(qm.depolarizing(1.0))
    assert len(k.kraus) == 4
    for op in k.kraus:
        assert np.linalg.norm(op) == pytest.approx(np.sqrt(2) / 2)
    assert qm.maps_close(qm.choi_from_kraus(k), qm.depolarizing(1.0))


def test_kraus_from_non_cp_choi():
    choi = np.diag([1.0, 0.5, 0.2, -0.1])
    with pytest.raises(NotCP):
        qm.kraus_from_choi(qm.MapRep(2, 2, choi))


def test_round_trip_random_channels(rng):
    for d_in, d_out in [(2, 2), (2, 3), (3, 2)]:
        m = qm.choi_from_kraus(qm.random_cptp(d_in, d_out, rng))
        assert qm.maps_close(qm.choi_from_kraus(qm.kraus_from_choi(m)), m)


def test_apply_matches_kraus(rng):
    k = qm.random_cptp(3, 2, rng)
    rho = qm.random_density_matrix(3, rng)
    assert np.allclose(qm.apply(qm.choi_from_kraus(k), rho), _kraus_apply(k.kraus, rho))
    assert np.allclose(k.apply(rho), _kraus_apply(k.kraus, rho))


def test_apply_identity_and_noise(rng):
    rho = qm.random_density_matrix(2, rng)
    assert np.allclose(qm.apply(qm.identity_map(2), rho), rho)
    for eps in (0.0, 0.3, 1.0):
        assert np.allclose(qm.apply(qm.depolarizing(eps), rho), (1 - eps) * rho + eps * np.eye(2) / 2)
    one = np.diag([0.0, 1.0])
    out = qm.amplitude_damping(0.3).apply(one)
    assert np.allclose(out, np.diag([0.3, 0.7]))


def test_apply_dimension_check():
    with pytest.raises(DimensionMismatch):
        qm.apply(qm.identity_map(2), np.eye(3))


def test_compose(rng):
    n = qm.choi_from_kraus(qm.random_cptp(2, 2, rng))
    assert qm.maps_close(qm.compose(qm.identity_map(2), n), n)
    ad1 = qm.choi_from_kraus(qm.amplitude_damping(1.0))
    assert qm.maps_close(qm.compose(ad1, ad1), ad1)
    c = qm.compose(qm.depolarizing(0.2), qm.depolarizing(0.5))
    for p in (I2, X, Y, Z):
        assert np.allclose(qm.apply(c, p), qm.apply(qm.depolarizing(1 - 0.8 * 0.5), p))


def test_compose_matches_sequential_application(rng):
    a = qm.choi_from_kraus(qm.random_cptp(2, 3, rng))
    b = qm.random_hp_map(3, 2, rng)
    rho = qm.random_density_matrix(2, rng)
    assert np.allclose(qm.apply(qm.compose(b, a), rho), qm.apply(b, qm.apply(a, rho)))
    with pytest.raises(DimensionMismatch):
        qm.compose(a, a)


def test_noise_constructors():
    assert qm.maps_close(qm.choi_from_kraus(qm.amplitude_damping(0)), qm.identity_map(2))
    assert qm.maps_close(qm.choi_from_kraus(qm.dephasing(0)), qm.identity_map(2))
    assert qm.maps_close(qm.depolarizing(0), qm.identity_map(2))
    assert np.allclose(qm.dephasing(1).apply(PLUS), np.eye(2) / 2)
    assert np.allclose(qm.apply(qm.depolarizing(1), PLUS), np.eye(2) / 2)
    for f in (qm.amplitude_damping, qm.dephasing, qm.depolarizing):
        with pytest.raises(ParamOutOfRange):
            f(1.5)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_noise_is_trace_preserving(eps):
    for m in (qm.choi_from_kraus(qm.amplitude_damping(eps)), qm.choi_from_kraus(qm.dephasing(eps)),
              qm.depolarizing(eps)):
        assert np.allclose(la.partial_trace(m.choi, 2, 2, "A"), np.eye(2))


def test_entry_extraction_examples():
    full = qm.ExtractionSpec(2, (0, 1), ((0, 0), (0, 1), (1, 1)))
    assert qm.maps_close(qm.entry_extraction(full), qm.identity_map(2))
    single = qm.entry_extraction(qm.ExtractionSpec(2, (0,), ((0, 0),)))
    h = np.array([[2.0, 1j], [-1j, 5.0]])
    assert np.allclose(qm.apply(single, h), [[2.0]])
    off = qm.entry_extraction(qm.ExtractionSpec(2, (0, 1), ((0, 1),)))
    assert np.allclose(qm.apply(off, h), [[0, 1j], [-1j, 0]])
    ref = np.zeros((4, 4))
    ref[0, 3] = ref[3, 0] = 1
    assert np.allclose(off.choi, ref)


def test_entry_extraction_matches_definition(rng):
    spec = qm.ExtractionSpec(5, (1, 2, 4), ((0, 1), (1, 1), (0, 2)))

    def f(h):
        out = np.zeros((3, 3), dtype=complex)
        for j, k in spec.symmetric_pairs():
            out[j, k] = h[spec.indices[j], spec.indices[k]]
        return out

    assert np.allclose(qm.entry_extraction(spec).choi, _choi_by_definition(f, 5))


def test_extraction_spec_validation():
    with pytest.raises(InvalidSpec):
        qm.ExtractionSpec(3, (0, 5), ((0, 0),))
    with pytest.raises(InvalidSpec):
        qm.ExtractionSpec(3, (1, 0), ((0, 0),))
    with pytest.raises(InvalidSpec):
        qm.ExtractionSpec(3, (0, 1), ((1, 0),))
    with pytest.raises(InvalidSpec):
        qm.ExtractionSpec(3, (), ())
    s = qm.ExtractionSpec(3, (0, 1), ((0, 1), (0, 1)))
    assert s.pairs == ((0, 1),)


def test_predicates():
    dep = qm.depolarizing(0.3)
    assert all(f(dep) for f in (qm.is_hermitian_preserving, qm.is_cp, qm.is_tp, qm.is_tni))
    t = qm.transpose_map(2)
    assert qm.is_hermitian_preserving(t) and not qm.is_cp(t)
    half = 0.5 * qm.identity_map(2)
    assert qm.is_hermitian_preserving(half) and qm.is_cp(half) and qm.is_tni(half)
    assert not qm.is_tp(half)
    skew = qm.MapRep(2, 2, np.diag([1j, 0, 0, 0]))
    assert not qm.is_hermitian_preserving(skew)


def test_map_arithmetic(rng):
    a, b = qm.random_hp_map(2, 2, rng), qm.random_hp_map(2, 2, rng)
    assert np.allclose((a + b).choi, a.choi + b.choi)
    assert np.allclose((a - b).choi, a.choi - b.choi)
    assert np.allclose((-2 * a).choi, -2 * a.choi)
    with pytest.raises(DimensionMismatch):
        a + qm.identity_map(3)


def test_map_from_function(rng):
    k = qm.random_cptp(2, 2, rng)
    assert qm.maps_close(qm.map_from_function(k.apply, 2, 2), qm.choi_from_kraus(k))
    assert qm.maps_close(qm.map_from_function(lambda r: r.T, 2, 2), qm.transpose_map(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([(1, 2), (2, 2), (2, 3), (3, 3)]))
def test_extraction_is_hermitian_preserving(seed, dims):
    rng = np.random.default_rng(seed)
    d, dp = dims[1], min(dims)
    idx = tuple(sorted(rng.choice(d, size=dp, replace=False)))
    pairs = [(j, k) for j in range(dp) for k in range(j, dp) if rng.random() < 0.5] or [(0, 0)]
    assert qm.is_hermitian_preserving(qm.entry_extraction(qm.ExtractionSpec(d, idx, pairs)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_random_channel_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    m = qm.choi_from_kraus(qm.random_cptp(2, 2, rng, rank=int(rng.integers(1, 5))))
    assert qm.is_cp(m) and qm.is_tp(m)
    assert qm.maps_close(qm.choi_from_kraus(qm.kraus_from_choi(m)), m)
