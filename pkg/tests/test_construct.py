from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellact import qmat
from bellact.bell import DichotomicObservable, QState, bell_value, chsh_operator, horodecki_max_chsh, product_state
from bellact.construct import (
    ActivationPair,
    ConditionalScheme,
    FlagError,
    IncompleteSchemeError,
    branch_value_decomposition,
    combined_construction,
    compile_scheme,
    flag_branches,
    flag_reduced_operator,
    leaf_states,
    pair_chsh_value,
    self_activation_state,
    single_copy_certificate,
    swap_parties_state,
    symmetric_embed,
)
from bellact.qmat import DimensionError, DimsSpec
from bellact.seesaw import SearchConfig, measurements_only_max, multi_restart_search

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture(scope="module")
def active_pair():
    res = multi_restart_search(SearchConfig(restarts=20, seed=0))
    pair = ActivationPair.from_search(res)
    assert pair.value > 2.02
    return pair


def random_pair(seed, d=2):
    r = np.random.default_rng(seed)
    s1 = QState(qmat.random_density(d * d, seed=r), DimsSpec.bipartite(d))
    s2 = QState(qmat.random_density(d * d, seed=r), DimsSpec.bipartite(d))
    obs = [DichotomicObservable.random(d * d, r) for _ in range(4)]
    return ActivationPair.from_observables(s1, s2, obs[:2], obs[2:])


def local_pair():
    mm = QState.maximally_mixed(2)
    c = DichotomicObservable.constant(4)
    return ActivationPair.from_observables(mm, mm, (c, c), (c, c))


def test_pair_value_matches_dense_evaluation(active_pair):
    p = active_pair
    dense = bell_value(chsh_operator(*p.alice, *p.bob), product_state(p.sigma1, p.sigma2))
    assert abs(dense - p.value) < 1e-10
    assert abs(p.recomputed_value() - p.value) < 1e-10
    assert horodecki_max_chsh(p.sigma1) <= 2 + 1e-8
    assert horodecki_max_chsh(p.sigma2) <= 2 + 1e-8


def test_compile_scheme_examples(rng):
    all_const = ConditionalScheme((2, 2), (2, 2), {p: None for p in [(0, 0), (0, 1), (1, 0), (1, 1)]})
    np.testing.assert_array_equal(compile_scheme(all_const).matrix, np.eye(16))
    o = DichotomicObservable.random(3, rng)
    single = compile_scheme(ConditionalScheme((1,), (3,), {(0,): o}))
    np.testing.assert_allclose(single.matrix, o.matrix, atol=1e-15)
    with pytest.raises(IncompleteSchemeError):
        compile_scheme(ConditionalScheme((2,), (3,), {(0,): o}))
    with pytest.raises(DimensionError):
        compile_scheme(ConditionalScheme((2,), (2,), {(0,): o, (1,): None}))


def test_compiled_observable_structure(rng):
    a = DichotomicObservable.random(4, rng)
    b = DichotomicObservable.random(4, rng)
    s = ConditionalScheme((2, 2), (2, 2), {(0, 0): a, (1, 1): b, (0, 1): None, (1, 0): None})
    o = compile_scheme(s)
    assert not o.violations()
    np.testing.assert_allclose(o.matrix @ o.matrix, np.eye(16), atol=1e-10)
    # factor order (flag1, main1, flag2, main2): project flags onto |0>|0>
    red = flag_reduced_operator(o.matrix, (2, 2, 2, 2), [0, 2], (0, 0))
    np.testing.assert_allclose(red, a.matrix, atol=1e-14)
    red = flag_reduced_operator(o.matrix, (2, 2, 2, 2), [0, 2], (0, 1))
    np.testing.assert_allclose(red, np.eye(4), atol=0)


def test_symmetric_embed_reported_value(active_pair):
    c = symmetric_embed(active_pair)
    v = c.value()
    assert abs(v - (2 + active_pair.delta / 2)) < 1e-9
    assert abs(v - c.expected_value) < 1e-9
    assert abs(round(v, 5) - 2.01162) < 1e-12
    for s in c.states:
        assert not s.violations()
        np.testing.assert_allclose(swap_parties_state(s).mat, s.mat, atol=1e-10)


def test_symmetric_embed_branch_arithmetic(active_pair):
    bs = symmetric_embed(active_pair).branches()
    assert len(bs) == 4
    np.testing.assert_allclose([b.weight for b in bs], 0.25, atol=1e-12)
    vals = sorted((b.value for b in bs), reverse=True)
    two_d = active_pair.value
    np.testing.assert_allclose(vals, [two_d, two_d, 2.0, 2.0], atol=1e-10)
    total = sum(b.weight * b.value for b in bs)
    assert abs(total - (2 * two_d + 2 * 2) / 4) < 1e-10


def test_self_activation(active_pair):
    c = self_activation_state(active_pair)
    sigma = c.states[0]
    assert c.states[1] is sigma
    assert not sigma.violations()
    assert abs(c.value() - (2 + active_pair.delta / 2)) < 1e-9
    bs = c.branches()
    np.testing.assert_allclose([b.weight for b in bs], 0.25, atol=1e-12)
    cert = single_copy_certificate(sigma)
    assert cert["local"] and len(cert["leaves"]) == 2


def test_self_activation_single_copy_probe(active_pair):
    sigma = self_activation_state(active_pair).states[0]
    probe = measurements_only_max(sigma, restarts=200, seed=1, max_cycles=100)
    assert probe <= 2 + 1e-6


def test_combined_construction(active_pair):
    c = combined_construction(active_pair)
    sigma = c.states[0]
    assert sigma.dims.dim_a == 8 and sigma.dims.dim_b == 8
    assert not sigma.violations()
    v = c.value()
    assert abs(v - (2 + active_pair.delta / 4)) < 1e-9
    assert abs(round(v, 5) - 2.00581) < 1e-12
    np.testing.assert_allclose(swap_parties_state(sigma).mat, sigma.mat, atol=1e-10)
    bs = c.branches()
    assert abs(sum(b.weight * b.value for b in bs) - v) < 1e-10
    assert single_copy_certificate(sigma)["local"]


def test_zero_delta_pair_gives_two():
    pair = local_pair()
    assert abs(pair.value - 2) < 1e-12
    assert abs(symmetric_embed(pair).value() - 2) < 1e-12
    assert abs(combined_construction(pair).value() - 2) < 1e-12
    assert abs(self_activation_state(pair).value() - 2) < 1e-12


@settings(max_examples=12, deadline=None)
@given(seeds)
def test_exact_ratio_law_on_random_pairs(seed):
    pair = random_pair(seed)
    assert abs(symmetric_embed(pair).value() - (2 + pair.delta / 2)) < 1e-9
    assert abs(self_activation_state(pair).value() - (2 + pair.delta / 2)) < 1e-9
    assert abs(combined_construction(pair).value() - (2 + pair.delta / 4)) < 1e-9


@settings(max_examples=12, deadline=None)
@given(seeds)
def test_branch_reconstruction_random_flagged_mixture(seed):
    r = np.random.default_rng(seed)
    pair = random_pair(seed)
    c = symmetric_embed(pair)
    # mix the flag patterns with random weights: still flag-orthogonal
    w = r.dirichlet(np.ones(2))
    s = c.states[0]
    other = symmetric_embed(random_pair(seed + 1)).states[0]
    mix = QState(w[0] * s.mat + w[1] * other.mat, s.dims, validate=False)
    bs = branch_value_decomposition((mix, c.states[1]), c.alice, c.bob)
    total = pair_chsh_value(c.alice, c.bob, mix, c.states[1])
    assert abs(sum(b.weight * b.value for b in bs) - total) < 1e-10
    assert all(abs(b.value) <= 2 * np.sqrt(2) + 1e-9 for b in bs)


def test_flag_reduction_bound(active_pair):
    c = combined_construction(active_pair)
    for o in (*c.alice, *c.bob):
        for pat in [(a, b) for a in range(2) for b in range(2)]:
            # per copy: outer flag, then the embedded (flag, qubit) main register
            red = flag_reduced_operator(o.matrix, (2, 4, 2, 4), [0, 2], pat)
            assert qmat.operator_norm(red) <= 1 + 1e-12


def test_single_branch_decomposition(active_pair):
    bs = branch_value_decomposition((active_pair.sigma1, active_pair.sigma2), active_pair.alice, active_pair.bob)
    assert len(bs) == 1
    assert abs(bs[0].value - active_pair.value) < 1e-12
    assert abs(bs[0].weight - 1.0) < 1e-12


def test_flag_coherence_rejected(active_pair):
    s = symmetric_embed(active_pair).states[0]
    m = s.mat.copy()
    # coherence between flag patterns (0,1) and (1,0)
    m[0, -1] = m[-1, 0] = 1e-3
    bad = QState(m, s.dims, validate=False)
    with pytest.raises(FlagError):
        flag_branches(bad)


def test_leaf_states(active_pair):
    s = combined_construction(active_pair).states[0]
    leaves = leaf_states(s)
    assert abs(sum(w for w, _ in leaves) - 1) < 1e-12
    assert all(l.dims.dim_a == 2 and l.dims.dim_b == 2 for _, l in leaves)


def test_dimension_checks():
    s = QState(qmat.random_density(6, seed=1), DimsSpec.bipartite(2, 3))
    c6 = DichotomicObservable.constant(4)
    c9 = DichotomicObservable.constant(9)
    pair = ActivationPair.from_observables(s, s, (c6, c6), (c9, c9))
    with pytest.raises(DimensionError):
        symmetric_embed(pair)
