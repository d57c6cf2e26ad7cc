from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellact import qmat
from bellact.bell import (
    BellFunctional,
    DichotomicObservable,
    InvalidStateError,
    Povm,
    QState,
    behavior,
    bell_operator,
    bell_value,
    cglmp3_functional,
    chsh_functional,
    chsh_operator,
    classical_bound_bruteforce,
    correlation_matrix,
    horodecki_max_chsh,
    maximally_entangled,
    pauli,
    product_state,
    singlet,
    two_qubit_chsh_max,
    werner_state,
)
from bellact.qmat import DimsSpec
from bellact.seesaw import alice_povm_operators, bob_povm_operators, update_povms

SQ2 = np.sqrt(2)
seeds = st.integers(0, 2**32 - 1)


def obs(m):
    return DichotomicObservable.from_matrix(np.asarray(m, dtype=complex))


def optimal_settings():
    _, _, z = pauli()
    x = pauli()[0]
    return obs(z), obs(x), obs((z + x) / SQ2), obs((z - x) / SQ2)


def random_state(d_a, d_b, seed, rank=None):
    return QState(qmat.random_density(d_a * d_b, rank=rank, seed=seed), DimsSpec.bipartite(d_a, d_b))


def test_qstate_validation():
    with pytest.raises(InvalidStateError):
        QState(np.diag([0.6, 0.6, 0, 0]), (2, 2))
    with pytest.raises(InvalidStateError):
        QState(np.diag([1.2, -0.2, 0, 0]), (2, 2))
    with pytest.raises(InvalidStateError):
        QState(np.array([[0.5, 0.1], [0.3, 0.5]]), (1, 2))
    bad = QState(np.diag([1.01, 0, 0, 0]), (2, 2), validate=False)
    assert set(bad.violations()) == {"trace"}
    mm = QState.maximally_mixed(2)
    assert abs(mm.purity - 0.25) < 1e-15


def test_observable_invariants():
    # construction does not validate, so corrupted files still load and report
    bad = DichotomicObservable(np.array([[1, 0.5], [0.5, 0]]))
    assert "idempotence" in bad.violations()
    o = DichotomicObservable.random(4, seed=1)
    np.testing.assert_allclose(o.matrix @ o.matrix, np.eye(4), atol=1e-10)
    c = DichotomicObservable.constant(3)
    np.testing.assert_array_equal(c.matrix, np.eye(3))


def test_povm_invariants():
    p = Povm.random_projective(4, 3, seed=2)
    np.testing.assert_allclose(sum(p.elements), np.eye(4), atol=1e-12)
    assert set(Povm((np.eye(2), np.eye(2))).violations()) == {"completeness"}
    assert "positivity" in Povm((np.diag([1.5, 1.0]), np.diag([-0.5, 0.0]))).violations()


def test_chsh_operator_examples():
    _, _, z = pauli()
    zz = obs(z)
    b = chsh_operator(zz, zz, zz, zz)
    np.testing.assert_allclose(b, 2 * np.kron(z, z), atol=0)
    assert abs(np.linalg.eigvalsh(b).max() - 2) < 1e-14
    b_opt = chsh_operator(*optimal_settings())
    assert abs(qmat.herm_eig(b_opt)[0][0] - 2 * SQ2) < 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_tsirelson_norm_bound(seed, da, db):
    r = np.random.default_rng(seed)
    ms = [DichotomicObservable.random(da, r) for _ in range(2)]
    ns = [DichotomicObservable.random(db, r) for _ in range(2)]
    b = chsh_operator(*ms, *ns)
    assert qmat.operator_norm(b) <= 2 * SQ2 + 1e-9


def test_chsh_operator_matches_functional(rng):
    ms = [DichotomicObservable.random(3, rng) for _ in range(4)]
    np.testing.assert_allclose(chsh_operator(*ms), bell_operator(chsh_functional(), ms[:2], ms[2:]), atol=1e-13)


def test_bell_value_examples(rng):
    ms = [DichotomicObservable.random(2, rng) for _ in range(4)]
    # traceless qubit observables need one +1 and one -1 eigenvalue, which random() gives
    assert abs(bell_value(chsh_operator(*ms), QState.maximally_mixed(2))) < 1e-14
    b = chsh_operator(*optimal_settings())
    # direct trace with an explicit matrix product as the second path
    direct = np.trace(b @ singlet().mat).real
    assert abs(abs(bell_value(b, singlet())) - 2 * SQ2) < 1e-12
    assert abs(bell_value(b, singlet()) - direct) < 1e-14
    r1, r2 = random_state(2, 2, 1), random_state(2, 2, 2)
    mix = QState(0.5 * r1.mat + 0.5 * r2.mat, r1.dims)
    bb = chsh_operator(*ms)
    assert abs(bell_value(bb, mix) - 0.5 * bell_value(bb, r1) - 0.5 * bell_value(bb, r2)) < 1e-12


def test_behavior_examples(rng):
    rho_a, rho_b = qmat.random_density(2, seed=1), qmat.random_density(3, seed=2)
    prod = QState(qmat.tensor(rho_a, rho_b), DimsSpec.bipartite(2, 3))
    alice = [Povm.random_projective(2, 2, rng) for _ in range(2)]
    bob = [Povm.random_projective(3, 3, rng) for _ in range(2)]
    t = behavior(prod, alice, bob).p
    pa = np.array([[np.trace(e @ rho_a).real for e in m.elements] for m in alice]).T  # [a, x]
    pb = np.array([[np.trace(e @ rho_b).real for e in m.elements] for m in bob]).T
    np.testing.assert_allclose(t, np.einsum("ax,by->abxy", pa, pb), atol=1e-12)
    mm = behavior(QState.maximally_mixed(2), [Povm.random_projective(2, 2, rng) for _ in range(2)],
                  [Povm.random_projective(2, 2, rng) for _ in range(2)])
    np.testing.assert_allclose(mm.p, 0.25, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(2, 3))
def test_behavior_is_no_signaling_and_matches_operator(seed, da, db):
    r = np.random.default_rng(seed)
    rho = random_state(da, db, r)
    ms = [DichotomicObservable.random(da, r) for _ in range(2)]
    ns = [DichotomicObservable.random(db, r) for _ in range(2)]
    t = behavior(rho, ms, ns)
    assert t.is_valid(1e-10)
    f = chsh_functional()
    v_table = f.value(t)
    v_corr = t.correlator(0, 0) + t.correlator(1, 0) + t.correlator(0, 1) - t.correlator(1, 1)
    v_op = bell_value(chsh_operator(*ms, *ns), rho)
    assert abs(v_table - v_op) < 1e-10
    assert abs(v_corr - v_op) < 1e-10


def test_classical_bounds():
    assert classical_bound_bruteforce(chsh_functional()) == 2.0
    assert classical_bound_bruteforce(cglmp3_functional()) == 2.0
    assert classical_bound_bruteforce(BellFunctional(np.zeros((2, 2, 2, 2)), 0.0)) == 0.0


def test_classical_bound_full_enumeration():
    # independent oracle: enumerate Alice and Bob jointly (81 strategies)
    import itertools

    c = cglmp3_functional().coefficients
    best = max(
        sum(c[a[x], b[y], x, y] for x in range(2) for y in range(2))
        for a in itertools.product(range(3), repeat=2)
        for b in itertools.product(range(3), repeat=2)
    )
    assert best == 2.0


def _fourier_basis(alpha, sign):
    w = np.exp(2j * np.pi / 3)
    return Povm(tuple(qmat.projector(np.array([w ** (sign * j * (k + alpha)) for j in range(3)]) / np.sqrt(3)) for k in range(3)))


def test_cglmp_maximally_entangled():
    f = cglmp3_functional()
    rho = maximally_entangled(3)
    # analytic optimal bases for the maximally entangled qutrit pair
    alice = [_fourier_basis(0.0, 1), _fourier_basis(0.5, 1)]
    bob = [_fourier_basis(-0.25, -1), _fourier_basis(0.25, -1)]
    v_analytic = f.value(behavior(rho, alice, bob))
    assert abs(v_analytic - 2.8729) < 1e-4
    assert abs(bell_value(bell_operator(f, alice, bob), rho) - v_analytic) < 1e-12
    # see-saw over POVMs on the fixed state reaches the same optimum
    r = np.random.default_rng(5)
    best = -np.inf
    for _ in range(4):
        a = [Povm.random_projective(3, 3, r) for _ in range(2)]
        b = [Povm.random_projective(3, 3, r) for _ in range(2)]
        for _ in range(60):
            a = [update_povms(g) for g in alice_povm_operators(f, b, rho)]
            b = [update_povms(g) for g in bob_povm_operators(f, a, rho)]
        best = max(best, f.value(behavior(rho, a, b)))
    assert abs(best - v_analytic) < 1e-6
    mm = behavior(QState.maximally_mixed(3), alice, bob)
    assert abs(f.value(mm)) < 1e-14


def test_horodecki_examples():
    assert abs(horodecki_max_chsh(singlet()) - 2 * SQ2) < 1e-12
    np.testing.assert_allclose(correlation_matrix(singlet()), -np.eye(3), atol=1e-14)
    assert horodecki_max_chsh(QState.maximally_mixed(2)) == 0.0
    for v in np.linspace(0, 1, 11):
        assert abs(horodecki_max_chsh(werner_state(v)) - 2 * SQ2 * v) < 1e-12
    assert two_qubit_chsh_max(QState.maximally_mixed(2)) == 2.0


def test_werner_threshold():
    # bisection on the oracle; the crossing is at 1/sqrt(2)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if horodecki_max_chsh(werner_state(mid)) > 2:
            hi = mid
        else:
            lo = mid
    assert abs(hi - 1 / SQ2) < 1e-6


def test_horodecki_dominates_sampled_settings(rng):
    for _ in range(20):
        rho = random_state(2, 2, rng)
        h = two_qubit_chsh_max(rho)
        for _ in range(20):
            ms = [DichotomicObservable.random(2, rng) for _ in range(4)]
            assert bell_value(chsh_operator(*ms), rho) <= h + 1e-12


def test_product_state_layout(rng):
    s1 = random_state(2, 3, rng)
    s2 = random_state(3, 2, rng)
    joint = product_state(s1, s2)
    assert joint.dims.dims == (2, 3, 3, 2)
    assert joint.dims.parties == ("A", "A", "B", "B")
    m = qmat.permute_factors(qmat.tensor(s1.mat, s2.mat), (2, 3, 3, 2), (0, 2, 1, 3))
    np.testing.assert_allclose(joint.mat, m, atol=0)
    # an operator on Alice's first factor only probes the first state
    a = qmat.random_observable(2, rng)
    lifted = qmat.tensor(a, np.eye(3 * 3 * 2))
    assert abs(np.trace(lifted @ joint.mat) - np.trace(qmat.tensor(a, np.eye(3)) @ s1.mat)) < 1e-12
