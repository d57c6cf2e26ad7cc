"""Flag-state constructions built from an activating pair of states.

Both constructions attach classical flag qubits to the states of a pair
(sigma1, sigma2) whose product violates CHSH by 2 + delta, and choose each
party's measurement conditioned on its flags:

* ``symmetric_embed`` yields two swap-symmetric states whose product
  reaches 2 + delta/2;
* ``self_activation_state`` yields one state whose two copies reach
  2 + delta/2;
* ``combined_construction`` applies the second to the output of the first,
  giving one swap-symmetric state with two copies at 2 + delta/4.

A party whose flags select no measurement outputs +1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import qmat
from .bell import DichotomicObservable, QState, chsh_operator, horodecki_max_chsh
from .qmat import DimensionError, DimsSpec

CHSH_COEFFS = np.array([[1.0, 1.0], [1.0, -1.0]])


class IncompleteSchemeError(ValueError):
    pass


class FlagError(ValueError):
    pass


def pair_chsh_value(
    alice: Sequence[DichotomicObservable],
    bob: Sequence[DichotomicObservable],
    rho1: QState,
    rho2: QState | None = None,
) -> float:
    """CHSH value of ``rho1 (x) rho2`` without forming the product matrix.

    Alice's observables act on (A of rho1, A of rho2), Bob's on the B parts.
    With ``rho2=None`` the observables act on ``rho1`` alone.
    """
    if rho2 is None:
        return float(np.sum(chsh_operator(alice[0], alice[1], bob[0], bob[1]).T * rho1.mat).real)
    a1, b1 = rho1.dims.dim_a, rho1.dims.dim_b
    a2, b2 = rho2.dims.dim_a, rho2.dims.dim_b
    r1 = rho1.mat.reshape(a1, b1, a1, b1)
    r2 = rho2.mat.reshape(a2, b2, a2, b2)
    if alice[0].dim != a1 * a2 or bob[0].dim != b1 * b2:
        raise DimensionError("observables do not act on the two-copy party spaces")
    total = 0.0
    for x, y in itertools.product(range(2), range(2)):
        m = alice[x].matrix.reshape(a1, a2, a1, a2)
        n = bob[y].matrix.reshape(b1, b2, b1, b2)
        # tr[(M (x) N)(rho1 (x) rho2)] with M[(i j),(k l)], rho1[(k p),(i q)] ...
        val = np.einsum("ijkl,pqrs,krip,lsjq->", m, n, r1, r2, optimize=True)
        total += CHSH_COEFFS[x, y] * val.real
    return float(total)


@dataclass(frozen=True, eq=False)
class ActivationPair:
    """Two states and CHSH observables on their joint party spaces."""

    sigma1: QState
    sigma2: QState
    m1: DichotomicObservable
    m2: DichotomicObservable
    n1: DichotomicObservable
    n2: DichotomicObservable
    value: float

    @property
    def alice(self) -> tuple[DichotomicObservable, DichotomicObservable]:
        return self.m1, self.m2

    @property
    def bob(self) -> tuple[DichotomicObservable, DichotomicObservable]:
        return self.n1, self.n2

    @property
    def delta(self) -> float:
        return self.value - 2.0

    def recomputed_value(self) -> float:
        return pair_chsh_value(self.alice, self.bob, self.sigma1, self.sigma2)

    @classmethod
    def from_observables(cls, sigma1, sigma2, alice, bob) -> ActivationPair:
        value = pair_chsh_value(alice, bob, sigma1, sigma2)
        return cls(sigma1, sigma2, alice[0], alice[1], bob[0], bob[1], value)

    @classmethod
    def from_search(cls, result) -> ActivationPair:
        if result.rho2 is None or not result.scenario.startswith("chsh"):
            raise ValueError("an activation pair needs a two-state CHSH search result")
        return cls.from_observables(result.rho1, result.rho2, result.alice, result.bob)


@dataclass(frozen=True, eq=False)
class ConditionalScheme:
    """Measurement chosen by the computational-basis value of flag registers.

    One flag and one main register per copy. ``branches`` maps each flag
    pattern to an observable on the main registers (ordered by copy) or to
    ``None`` for the constant +1 output.
    """

    flag_dims: tuple[int, ...]
    main_dims: tuple[int, ...]
    branches: Mapping[tuple[int, ...], DichotomicObservable | None]

    def patterns(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(f) for f in self.flag_dims)))

    @property
    def main_dim(self) -> int:
        return int(np.prod(self.main_dims))


def compile_scheme(scheme: ConditionalScheme) -> DichotomicObservable:
    """Flatten a scheme to sum_p |p><p| (x) M_p on (flag1, main1, flag2, main2, ...)."""
    patterns = scheme.patterns()
    keys = set(tuple(k) for k in scheme.branches)
    if keys != set(patterns):
        missing = sorted(set(patterns) - keys)
        extra = sorted(keys - set(patterns))
        raise IncompleteSchemeError(f"branch table mismatch: missing {missing}, unexpected {extra}")
    k = len(scheme.flag_dims)
    if len(scheme.main_dims) != k:
        raise DimensionError("one main register per flag register is required")
    dm = scheme.main_dim
    fdim = int(np.prod(scheme.flag_dims))
    proj = np.zeros((fdim * dm, fdim * dm), dtype=complex)
    for idx, pat in enumerate(patterns):
        sub = scheme.branches[pat]
        if sub is None:
            sub_p = np.eye(dm)
        else:
            if sub.dim != dm:
                raise DimensionError(f"branch {pat} observable has dimension {sub.dim}, expected {dm}")
            sub_p = sub.proj_plus
        proj[idx * dm : (idx + 1) * dm, idx * dm : (idx + 1) * dm] = sub_p
    grouped = tuple(scheme.flag_dims) + tuple(scheme.main_dims)
    perm = [j for i in range(k) for j in (i, k + i)]
    return DichotomicObservable(qmat.permute_factors(proj, grouped, perm))


def _attach_flags(sigma: QState, fa: int, fb: int, nflag: int = 2) -> tuple[np.ndarray, DimsSpec]:
    """|fa><fa| (x) |fb><fb| (x) sigma reordered to (flagA, A..., flagB, B...)."""
    dims = sigma.dims
    a_idx, b_idx = dims.factors_of("A"), dims.factors_of("B")
    mat = qmat.tensor(qmat.basis_projector(nflag, fa), qmat.basis_projector(nflag, fb), sigma.mat)
    grouped = (nflag, nflag) + dims.dims
    perm = [0] + [2 + i for i in a_idx] + [1] + [2 + i for i in b_idx]
    mat = qmat.permute_factors(mat, grouped, perm)
    labels = dims.labels or tuple("main" for _ in dims.dims)
    new = DimsSpec(
        (nflag,) + tuple(dims.dims[i] for i in a_idx) + (nflag,) + tuple(dims.dims[i] for i in b_idx),
        ("A",) * (1 + len(a_idx)) + ("B",) * (1 + len(b_idx)),
        ("flag",) + tuple(labels[i] for i in a_idx) + ("flag",) + tuple(labels[i] for i in b_idx),
    )
    return mat, new


def swap_parties_state(sigma: QState) -> QState:
    """V sigma V with Alice's and Bob's full spaces exchanged."""
    if sigma.dims.dim_a != sigma.dims.dim_b:
        raise DimensionError("party swap needs equal local dimensions")
    d = sigma.dims.dim_a
    v = qmat.swap_operator(d)
    a_idx, b_idx = sigma.dims.factors_of("A"), sigma.dims.factors_of("B")
    order = b_idx + a_idx
    labels = sigma.dims.labels
    parties_swapped = DimsSpec(
        tuple(sigma.dims.dims[i] for i in order),
        ("A",) * len(b_idx) + ("B",) * len(a_idx),
        None if labels is None else tuple(labels[i] for i in order),
    )
    return QState(v @ sigma.mat @ v, parties_swapped, validate=False)


def swap_copies(obs: DichotomicObservable, d: int) -> DichotomicObservable:
    """V O V for an observable on two registers of dimension ``d``."""
    v = qmat.swap_operator(d)
    return DichotomicObservable(v @ obs.proj_plus @ v)


@dataclass(frozen=True, eq=False)
class Construction:
    """Output of a flag construction, evaluated on states[0] (x) states[1]."""

    kind: str
    states: tuple[QState, QState]
    alice_schemes: tuple[ConditionalScheme, ConditionalScheme]
    bob_schemes: tuple[ConditionalScheme, ConditionalScheme]
    alice: tuple[DichotomicObservable, DichotomicObservable]
    bob: tuple[DichotomicObservable, DichotomicObservable]
    expected_value: float
    source_value: float

    def value(self) -> float:
        return pair_chsh_value(self.alice, self.bob, self.states[0], self.states[1])

    def as_pair(self) -> ActivationPair:
        return ActivationPair(
            self.states[0], self.states[1], self.alice[0], self.alice[1], self.bob[0], self.bob[1], self.value()
        )

    def branches(self) -> list[Branch]:
        return branch_value_decomposition((self.states[0], self.states[1]), self.alice, self.bob)


def _check_pair(pair: ActivationPair) -> None:
    d1, d2 = pair.sigma1.dims, pair.sigma2.dims
    if d1.dims != d2.dims or d1.parties != d2.parties:
        raise DimensionError("both states of the pair need the same factor layout")
    if d1.dim_a != d1.dim_b:
        raise DimensionError("flag constructions need equal local dimensions")


def symmetric_embed(pair: ActivationPair) -> Construction:
    """Swap-symmetric states (|0><0| (x) |1><1| (x) s + |1><1| (x) |0><0| (x) VsV)/2."""
    _check_pair(pair)
    d = pair.sigma1.dims.dim_a
    states = []
    for sigma in (pair.sigma1, pair.sigma2):
        t1, dims = _attach_flags(sigma, 0, 1)
        t2, _ = _attach_flags(swap_parties_state(sigma), 1, 0)
        states.append(QState(qmat.hermitian_part((t1 + t2) / 2), dims, validate=False))
    alice_schemes, bob_schemes = [], []
    for z in range(2):
        # both parties: flags 00 -> Alice's observable, flags 11 -> Bob's
        table = {(0, 0): pair.alice[z], (1, 1): pair.bob[z], (0, 1): None, (1, 0): None}
        alice_schemes.append(ConditionalScheme((2, 2), (d, d), table))
        bob_schemes.append(ConditionalScheme((2, 2), (d, d), dict(table)))
    alice = tuple(compile_scheme(s) for s in alice_schemes)
    bob = tuple(compile_scheme(s) for s in bob_schemes)
    return Construction(
        "symmetric-embed", tuple(states), tuple(alice_schemes), tuple(bob_schemes), alice, bob,
        expected_value=(pair.value + 2.0) / 2, source_value=pair.value,
    )


def self_activation_state(pair: ActivationPair) -> Construction:
    """(|1><1| (x) |1><1| (x) sigma1 + |0><0| (x) |0><0| (x) sigma2)/2 and its two-copy scheme."""
    _check_pair(pair)
    d = pair.sigma1.dims.dim_a
    t1, dims = _attach_flags(pair.sigma1, 1, 1)
    t2, _ = _attach_flags(pair.sigma2, 0, 0)
    sigma = QState(qmat.hermitian_part((t1 + t2) / 2), dims, validate=False)

    def scheme(obs: DichotomicObservable) -> ConditionalScheme:
        # flags (1, 0): copy 1 holds sigma1; (0, 1): copies reversed
        return ConditionalScheme(
            (2, 2), (d, d), {(1, 0): obs, (0, 1): swap_copies(obs, d), (0, 0): None, (1, 1): None}
        )

    alice_schemes = tuple(scheme(o) for o in pair.alice)
    bob_schemes = tuple(scheme(o) for o in pair.bob)
    alice = tuple(compile_scheme(s) for s in alice_schemes)
    bob = tuple(compile_scheme(s) for s in bob_schemes)
    return Construction(
        "self-activation", (sigma, sigma), alice_schemes, bob_schemes, alice, bob,
        expected_value=(pair.value + 2.0) / 2, source_value=pair.value,
    )


def combined_construction(pair: ActivationPair) -> Construction:
    """Self-activation applied to the symmetric embedding: two copies give 2 + delta/4."""
    inner = symmetric_embed(pair).as_pair()
    out = self_activation_state(inner)
    return Construction(
        "combined", out.states, out.alice_schemes, out.bob_schemes, out.alice, out.bob,
        expected_value=(pair.value + 6.0) / 4, source_value=pair.value,
    )


CONSTRUCTIONS = {
    "symmetric-embed": symmetric_embed,
    "self-activation": self_activation_state,
    "combined": combined_construction,
}


# --------------------------------------------------------------------------
# flag branches


@dataclass(frozen=True, eq=False)
class Branch:
    pattern: tuple[int, ...]
    weight: float
    value: float
    states: tuple[QState, ...]


def _flag_masks(dims: DimsSpec, flags: Sequence[int]):
    idx = np.indices(dims.dims).reshape(dims.n_factors, -1)
    for pat in itertools.product(*(range(dims.dims[f]) for f in flags)):
        mask = np.ones(dims.total, dtype=bool)
        for f, v in zip(flags, pat):
            mask &= idx[f] == v
        yield pat, mask


def flag_branches(state: QState, flags: Sequence[int] | None = None, tol: float = 1e-10) -> list[tuple[tuple[int, ...], float, QState]]:
    """Split a flag-block-diagonal state into (pattern, weight, conditional state).

    Conditional states are returned on the non-flag factors. Raises
    :class:`FlagError` when the state has coherences between flag patterns.
    """
    flags = state.dims.flag_factors() if flags is None else list(flags)
    if not flags:
        return [((), 1.0, state)]
    dims = state.dims
    rest = [i for i in range(dims.n_factors) if i not in flags]
    if not rest:
        raise FlagError("a state needs at least one non-flag factor")
    block_sum = np.zeros_like(state.mat)
    out = []
    rest_dims = DimsSpec(
        tuple(dims.dims[i] for i in rest),
        tuple(dims.parties[i] for i in rest),
        None if dims.labels is None else tuple(dims.labels[i] for i in rest),
    )
    for pat, mask in _flag_masks(dims, flags):
        block = state.mat[np.ix_(mask, mask)]
        block_sum[np.ix_(mask, mask)] = block
        w = float(np.trace(block).real)
        if w > tol:
            out.append((pat, w, QState(qmat.hermitian_part(block / w), rest_dims, validate=False)))
    coherence = float(np.max(np.abs(state.mat - block_sum)))
    if coherence > tol:
        raise FlagError(f"flags are not orthogonal: off-block entries up to {coherence:.3e}")
    return out


def branch_value_decomposition(
    state: QState | tuple[QState, QState],
    alice: Sequence[DichotomicObservable],
    bob: Sequence[DichotomicObservable],
    tol: float = 1e-10,
) -> list[Branch]:
    """Weights and CHSH values of each flag pattern with nonzero weight.

    ``state`` is a single flagged state or a pair evaluated as a product.
    The weighted branch values sum to the total CHSH value because compiled
    observables are block diagonal in the flags.
    """
    if isinstance(state, QState):
        dims = state.dims
        flags = dims.flag_factors()
        if not flags:
            return [Branch((), 1.0, pair_chsh_value(alice, bob, state), (state,))]
        flag_branches(state, flags, tol)  # orthogonality check
        out = []
        for pat, mask in _flag_masks(dims, flags):
            w = float(np.trace(state.mat[np.ix_(mask, mask)]).real)
            if w <= tol:
                continue
            proj_state = np.zeros_like(state.mat)
            proj_state[np.ix_(mask, mask)] = state.mat[np.ix_(mask, mask)] / w
            cond = QState(proj_state, dims, validate=False)
            out.append(Branch(pat, w, pair_chsh_value(alice, bob, cond), (cond,)))
        return out
    s1, s2 = state
    out = []
    parts = []
    for s in (s1, s2):
        flags = s.dims.flag_factors()
        flag_branches(s, flags, tol)
        items = []
        for pat, mask in _flag_masks(s.dims, flags) if flags else [((), np.ones(s.dim, dtype=bool))]:
            w = float(np.trace(s.mat[np.ix_(mask, mask)]).real)
            if w <= tol:
                continue
            m = np.zeros_like(s.mat)
            m[np.ix_(mask, mask)] = s.mat[np.ix_(mask, mask)] / w
            items.append((pat, w, QState(m, s.dims, validate=False)))
        parts.append(items)
    for (p1, w1, c1), (p2, w2, c2) in itertools.product(*parts):
        out.append(Branch(p1 + p2, w1 * w2, pair_chsh_value(alice, bob, c1, c2), (c1, c2)))
    return out


def flag_reduced_operator(
    op: np.ndarray, party_dims: Sequence[int], flags: Sequence[int], pattern: Sequence[int]
) -> np.ndarray:
    """<pattern| O |pattern> on the non-flag factors of one party's space."""
    party_dims = tuple(int(d) for d in party_dims)
    idx = np.indices(party_dims).reshape(len(party_dims), -1)
    mask = np.ones(int(np.prod(party_dims)), dtype=bool)
    for f, v in zip(flags, pattern):
        mask &= idx[f] == v
    return op[np.ix_(mask, mask)]


def leaf_states(state: QState, tol: float = 1e-10) -> list[tuple[float, QState]]:
    """Recursively strip flags, returning (weight, unflagged state) leaves."""
    if not state.dims.flag_factors():
        return [(1.0, state)]
    leaves = []
    for _, w, cond in flag_branches(state, tol=tol):
        leaves.extend((w * w2, s) for w2, s in leaf_states(cond, tol))
    return leaves


def single_copy_certificate(state: QState) -> dict:
    """Locality evidence for a flagged state built from two-qubit branches.

    Every leaf must be a 2 x 2 state; the report lists the Horodecki value
    of each. Flag measurements reduce any observable to a contraction on
    each branch, so the state is CHSH-local when every leaf is.
    """
    leaves = leaf_states(state)
    values = []
    for w, s in leaves:
        if s.dims.dim_a != 2 or s.dims.dim_b != 2:
            raise DimensionError("leaf certificate only available for two-qubit leaves")
        values.append((w, max(2.0, horodecki_max_chsh(s))))
    return {
        "leaves": values,
        "max_leaf_chsh": max(v for _, v in values),
        "local": all(v <= 2.0 + 1e-8 for _, v in values),
    }
