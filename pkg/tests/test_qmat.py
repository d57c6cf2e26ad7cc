from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellact import qmat
from bellact.bell import singlet
from bellact.qmat import DimensionError, DimsSpec

seeds = st.integers(0, 2**32 - 1)


def rand_mat(r, c, seed):
    return qmat.ginibre(r, c, seed)


def test_tensor_identities():
    assert np.array_equal(qmat.tensor(np.eye(2), np.eye(2)), np.eye(4))
    z = np.diag([1.0, -1.0])
    assert np.array_equal(qmat.tensor(z, np.eye(2)), np.diag([1.0, 1.0, -1.0, -1.0]))


def test_tensor_index_formula(rng):
    a = qmat.ginibre(3, 3, rng)
    b = qmat.ginibre(3, 3, rng)
    t = qmat.tensor(a, b)
    brute = np.zeros((9, 9), dtype=complex)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    brute[i * 3 + k, j * 3 + l] = a[i, j] * b[k, l]
    # numpy and Python complex products may round differently in the last bit
    np.testing.assert_allclose(t, brute, rtol=0, atol=1e-15)


def test_tensor_matches_numpy_kron(rng):
    a, b = qmat.ginibre(2, 3, rng), qmat.ginibre(4, 1, rng)
    np.testing.assert_allclose(qmat.tensor(a, b), np.kron(a, b), atol=0)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_tensor_associative_exactly(seed):
    # integer entries keep every product exact, so equality must be bitwise
    r = np.random.default_rng(seed)
    a, b, c = (r.integers(-9, 10, (2, 2)) + 1j * r.integers(-9, 10, (2, 2)) for _ in range(3))
    left = qmat.tensor(qmat.tensor(a, b), c)
    right = qmat.tensor(a, qmat.tensor(b, c))
    assert np.array_equal(left, right)


def test_partial_trace_examples():
    rho = qmat.random_density(2, seed=1)
    sigma = qmat.random_density(3, seed=2)
    np.testing.assert_allclose(qmat.partial_trace(qmat.tensor(rho, sigma), (2, 3), [0]), rho, atol=1e-12)
    np.testing.assert_allclose(qmat.partial_trace(np.eye(4), (2, 2), [0]), 2 * np.eye(2), atol=0)
    s = singlet().mat
    # direct index sum oracle
    for keep in (0, 1):
        t = s.reshape(2, 2, 2, 2)
        brute = np.zeros((2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    brute[i, j] += t[i, k, j, k] if keep == 0 else t[k, i, k, j]
        np.testing.assert_allclose(qmat.partial_trace(s, (2, 2), [keep]), brute, atol=1e-15)
        np.testing.assert_allclose(brute, np.eye(2) / 2, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_tensor_associative_float(seed):
    r = np.random.default_rng(seed)
    a, b, c = (qmat.ginibre(2, 3, r) for _ in range(3))
    np.testing.assert_allclose(qmat.tensor(qmat.tensor(a, b), c), qmat.tensor(a, qmat.tensor(b, c)), rtol=0, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_partial_trace_product(seed, da, db):
    r = np.random.default_rng(seed)
    a, b = qmat.ginibre(da, da, r), qmat.ginibre(db, db, r)
    out = qmat.partial_trace(qmat.tensor(a, b), (da, db), [0])
    np.testing.assert_allclose(out, a * np.trace(b), atol=1e-12 * max(1.0, np.abs(a).max() * np.abs(b).sum()))


def test_partial_trace_three_factors_keep_order(rng):
    ms = [qmat.random_density(d, seed=rng) for d in (2, 3, 2)]
    full = qmat.tensor(*ms)
    np.testing.assert_allclose(qmat.partial_trace(full, (2, 3, 2), [0, 2]), qmat.tensor(ms[0], ms[2]), atol=1e-14)
    # keep is a set: output factors follow the input order
    np.testing.assert_allclose(qmat.partial_trace(full, (2, 3, 2), [2, 0]), qmat.tensor(ms[0], ms[2]), atol=1e-14)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        qmat.partial_trace(np.eye(4), (2, 3), [0])


def test_swap_operator_examples():
    v = qmat.swap_operator(2)
    ket01 = np.zeros(4)
    ket01[1] = 1
    ket10 = np.zeros(4)
    ket10[2] = 1
    np.testing.assert_array_equal(v @ ket01, ket10)
    np.testing.assert_array_equal(v @ v, np.eye(4))
    for d in (2, 3, 4):
        assert np.trace(qmat.swap_operator(d)) == d


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 4))
def test_swap_conjugation(seed, d):
    r = np.random.default_rng(seed)
    a, b = qmat.ginibre(d, d, r), qmat.ginibre(d, d, r)
    v = qmat.swap_operator(d)
    np.testing.assert_allclose(v @ qmat.tensor(a, b) @ v, qmat.tensor(b, a), atol=1e-12)


def test_permute_factors_matches_operator(rng):
    dims = (2, 3, 2)
    m = qmat.ginibre(12, 12, rng)
    perm = (2, 0, 1)
    p = qmat.permutation_operator(dims, perm)
    np.testing.assert_allclose(qmat.permute_factors(m, dims, perm), p @ m @ p.T, atol=1e-13)
    a, b, c = (qmat.ginibre(d, d, rng) for d in dims)
    np.testing.assert_allclose(qmat.permute_factors(qmat.tensor(a, b, c), dims, perm), qmat.tensor(c, a, b), atol=1e-13)


def test_herm_eig_examples():
    w, _ = qmat.herm_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(w, [3.0, 2.0, 1.0])
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    w, v = qmat.herm_eig(x)
    np.testing.assert_allclose(w, [1, -1], atol=1e-15)
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    assert abs(abs(np.vdot(v[:, 0], plus)) - 1) < 1e-12
    assert abs(abs(np.vdot(v[:, 1], minus)) - 1) < 1e-12


def test_herm_eig_reconstruction(rng):
    h = qmat.hermitian_part(qmat.ginibre(8, 8, rng))
    w, v = qmat.herm_eig(h)
    np.testing.assert_allclose((v * w) @ v.conj().T, h, atol=1e-10)
    assert abs(w.sum() - np.trace(h).real) < 1e-10
    assert np.all(np.diff(w) <= 0)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(qmat.NotHermitianError):
        qmat.herm_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_herm_svd_examples(rng):
    lam, _ = qmat.herm_svd(np.diag([-2.0, 3.0]))
    np.testing.assert_array_equal(lam, [3.0, -2.0])
    lam, phi = qmat.herm_svd(np.zeros((3, 3)))
    np.testing.assert_array_equal(lam, np.zeros(3))
    f = qmat.hermitian_part(qmat.ginibre(6, 6, rng))
    lam, phi = qmat.herm_svd(f)
    assert abs(np.abs(lam).sum() - np.abs(np.linalg.eigvalsh(f)).sum()) < 1e-12
    assert abs(qmat.trace_norm(f) - np.abs(lam).sum()) < 1e-12
    np.testing.assert_allclose(phi.conj().T @ phi, np.eye(6), atol=1e-12)


def test_sign_operator_attains_trace_norm(rng):
    f = qmat.hermitian_part(qmat.ginibre(5, 5, rng))
    p = qmat.sign_operator(f)
    s = 2 * p - np.eye(5)
    assert abs(np.trace(s @ f).real - qmat.trace_norm(f)) < 1e-12
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    # sgn(0) = +1
    np.testing.assert_allclose(qmat.sign_operator(np.zeros((3, 3))), np.eye(3), atol=0)


def test_random_density_properties():
    rho = qmat.random_density(4, rank=1, seed=3)
    assert abs(np.trace(rho @ rho).real - 1) < 1e-10
    for rank in (None, 2, 4):
        rho = qmat.random_density(5, rank=rank, seed=9)
        assert np.linalg.eigvalsh(rho).min() >= -1e-12
        assert abs(np.trace(rho).real - 1) < 1e-12
    assert np.array_equal(qmat.random_density(3, seed=11), qmat.random_density(3, seed=11))


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_random_observable(d):
    m = qmat.random_observable(d, seed=d)
    np.testing.assert_allclose(m @ m, np.eye(d), atol=1e-12)
    assert qmat.hermitian_deviation(m) < 1e-12
    assert round(np.trace(m).real) == d % 2
    assert np.array_equal(m, qmat.random_observable(d, seed=d))


def test_haar_unitary_is_unitary(rng):
    u = qmat.haar_unitary(6, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-12)


def test_dims_spec():
    d = DimsSpec.bipartite(2, 3)
    assert d.total == 6 and d.dim_a == 2 and d.dim_b == 3
    assert DimsSpec.from_dict(d.to_dict()) == d
    with pytest.raises(DimensionError):
        DimsSpec((2, 2), ("B", "A"))
    f = DimsSpec((2, 3, 2, 3), ("A", "A", "B", "B"), ("flag", "main", "flag", "main"))
    assert f.flag_factors() == [0, 2]
    assert f.coarse() == DimsSpec.bipartite(6, 6)
