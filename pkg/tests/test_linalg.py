import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from epclass.errors import NearDefective, ZeroVector
from epclass.linalg import (biorthonormalize, eig_batch, eig_full, gauge_balance, min_gap,
                            phase_rigidity, rigidities)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def complex_matrices(n):
    return st.tuples(arrays(float, (n, n), elements=finite),
                     arrays(float, (n, n), elements=finite)).map(lambda p: p[0] + 1j * p[1])


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 2, 3, 4, 5]).flatmap(complex_matrices))
def test_eigenpairs_have_small_residuals(h):
    w, r, l = eig_batch(h)
    scale = max(1.0, np.linalg.norm(h))
    # the closed forms may lose accuracy only where the matrix is near-defective
    if h.shape[0] > 1 and min_gap(w) < 1e-6 * scale:
        return
    assert np.linalg.norm(h @ r - r * w, axis=0).max() <= 1e-8 * scale
    assert np.linalg.norm(l.conj().T @ h - w[:, None] * l.conj().T, axis=1).max() <= 1e-8 * scale
    assert np.allclose(np.linalg.norm(r, axis=0), 1)
    ref = list(np.linalg.eigvals(h))
    for z in w:
        j = int(np.argmin(np.abs(np.array(ref) - z)))
        assert abs(ref.pop(j) - z) <= 1e-8 * scale


def test_batch_matches_single(rng):
    h = rng.normal(size=(4, 5, 3, 3)) + 1j * rng.normal(size=(4, 5, 3, 3))
    w, r, l = eig_batch(h)
    for idx in np.ndindex(4, 5):
        w1, r1, l1 = eig_batch(h[idx])
        assert np.allclose(w[idx], w1, rtol=0, atol=1e-13)


def test_values_sorted_lexicographically(rng):
    h = rng.normal(size=(50, 3, 3)) + 1j * rng.normal(size=(50, 3, 3))
    w, _, _ = eig_batch(h)
    key = w.real + 1e-9 * w.imag
    assert np.all(np.diff(key, axis=-1) >= 0)


def test_identity_and_jordan_block():
    sys = eig_full(np.eye(2))
    assert np.allclose(sys.values, [1, 1])
    assert not sys.defective
    jordan = eig_full(np.array([[0, 1], [0, 0]], dtype=complex))
    assert jordan.defective


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3, 4]).flatmap(complex_matrices))
def test_biorthonormalize_gives_identity_gram(h):
    sys = eig_full(h)
    if min_gap(sys.values) < 1e-3 * max(1.0, sys.scale):
        with pytest.raises(NearDefective) if min_gap(sys.values) <= 1e-10 * max(1, sys.scale) \
                else _nothing():
            biorthonormalize(sys)
        return
    bi = biorthonormalize(sys)
    assert bi.biorthonormal
    assert np.allclose(bi.gram(), np.eye(len(h)), atol=1e-8 * max(1.0, sys.condition))


class _nothing:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def test_biorthonormalize_rejects_degenerate():
    with pytest.raises(NearDefective):
        biorthonormalize(eig_full(np.eye(3)))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3, 4]).flatmap(complex_matrices))
def test_rigidity_bounded_and_one_for_hermitian(h):
    sys = eig_full(h)
    r = rigidities(sys.left, sys.right)
    assert np.all(r <= 1 + 1e-9)
    herm = h + h.conj().T
    hs = eig_full(herm)
    assert np.allclose(rigidities(hs.left, hs.right), 1, atol=1e-10)


def test_phase_rigidity_scalar():
    assert phase_rigidity([1, 0], [1, 0]) == 1
    assert abs(phase_rigidity([1, 0], [0, 1])) == 0
    with pytest.raises(ZeroVector):
        phase_rigidity([0, 0], [1, 0])


def test_gauge_balance_symmetrizes_nonreciprocal_chain():
    n = 30
    h = np.zeros((n, n))
    for i in range(n - 1):
        h[i, i + 1] = 2.0
        h[i + 1, i] = 0.5
    x = gauge_balance(h)
    b = h * np.exp(x[None, :] - x[:, None])
    assert np.allclose(np.abs(b), np.abs(b).T)
    sys = eig_full(h, balance=True)
    assert np.max(np.abs(sys.values.imag)) < 1e-12
    assert np.allclose(np.sort(sys.values.real), np.linalg.eigvalsh(np.abs(b)), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 10, 40, 100])
def test_residuals_on_random_dense_matrices(rng, n):
    for _ in range(5 if n <= 10 else 2):
        h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        sys = eig_full(h)
        fro = np.linalg.norm(h)
        res = np.linalg.norm(h @ sys.right - sys.right * sys.values, axis=0)
        assert res.max() / fro <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3, 4, 6, 10]).flatmap(complex_matrices))
def test_trace_and_determinant(h):
    w, _, _ = eig_batch(h)
    fro = max(1.0, np.linalg.norm(h))
    assert abs(np.trace(h) - w.sum()) <= 1e-10 * fro
    det = np.linalg.det(h)
    if abs(det) > 1e-6 * fro ** len(h):
        assert abs(det - np.prod(w)) <= 1e-8 * abs(det)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 3, 5]).flatmap(complex_matrices))
def test_biorthonormalize_is_idempotent(h):
    sys = eig_full(h)
    if min_gap(sys.values) < 1e-3 * max(1.0, sys.scale) or sys.condition > 1e4:
        return
    once = biorthonormalize(sys)
    twice = biorthonormalize(once)
    assert np.allclose(twice.gram(), once.gram(), rtol=0, atol=1e-12)


@settings(max_examples=100)
@given(arrays(complex, 4, elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                        allow_infinity=False)),
       arrays(complex, 4, elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                        allow_infinity=False)),
       st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False,
                          allow_infinity=False),
       st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False,
                          allow_infinity=False))
def test_phase_rigidity_rescaling_invariant(a, b, ca, cb):
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    r0 = abs(phase_rigidity(a, b))
    assert abs(abs(phase_rigidity(ca * a, cb * b)) - r0) <= 1e-14 + 1e-13 * r0
