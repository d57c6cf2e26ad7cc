"""Two-symmetric extensions of bipartite states.

A B-side extension of a state on (A, B) lives on (A, B, B') and is invariant
under swapping B and B'. An A-side extension lives on (C, A, B), with C a
copy of A, and is invariant under swapping C and A. Tracing out the extra
copy (B' or C) returns the extended state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qmat
from .bell import BehaviorTable, InvalidStateError, QState, _measurements
from .qmat import DimensionError, DimsSpec

CERTIFY_TOL = 1e-8
SIDES = ("A", "B")


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return side


def extension_dims(d_a: int, d_b: int, side: str) -> DimsSpec:
    if _check_side(side) == "A":
        return DimsSpec((d_a, d_a, d_b), ("A", "A", "B"))
    return DimsSpec((d_a, d_b, d_b), ("A", "B", "B"))


def _layout(side: str) -> tuple[tuple[int, int], int, list[int]]:
    """(swapped factor pair, extra factor, kept factors) of an extension."""
    if side == "A":
        return (0, 1), 0, [1, 2]
    return (1, 2), 2, [0, 1]


@dataclass(frozen=True, eq=False)
class SymmetricExtensionWitness:
    ext: QState
    side: str
    reduced: QState

    @property
    def swap(self) -> np.ndarray:
        (i, j), _, _ = _layout(self.side)
        return qmat.factor_swap(self.ext.dims, i, j)

    def reduce(self) -> np.ndarray:
        _, _, keep = _layout(self.side)
        return qmat.partial_trace(self.ext.mat, self.ext.dims, keep)


@dataclass
class ExtensionReport:
    deviations: dict[str, float]
    tol: float = CERTIFY_TOL
    side: str = ""

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.deviations.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.deviations.items() if v > self.tol]

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        body = ", ".join(f"{k}={v:.2e}" for k, v in self.deviations.items())
        return f"{self.side}-side extension {status} (tol {self.tol:.0e}): {body}"


def certify_extension(witness: SymmetricExtensionWitness, tol: float = CERTIFY_TOL) -> ExtensionReport:
    ext = witness.ext.mat
    v = witness.swap
    dev = {
        "ext_hermiticity": qmat.hermitian_deviation(ext),
        "ext_positivity": max(0.0, -qmat.min_eigenvalue(ext)),
        "ext_trace": abs(np.trace(ext) - 1.0),
        "permutation_invariance": float(np.max(np.abs(v @ ext @ v.conj().T - ext))),
        "reduction": float(np.max(np.abs(witness.reduce() - witness.reduced.mat))),
        "reduced_positivity": max(0.0, -qmat.min_eigenvalue(witness.reduced.mat)),
        "reduced_trace": abs(np.trace(witness.reduced.mat) - 1.0),
    }
    return ExtensionReport(dev, tol, witness.side)


def witness_from_extension(ext: np.ndarray, d_a: int, d_b: int, side: str) -> SymmetricExtensionWitness:
    dims = extension_dims(d_a, d_b, side)
    ext = qmat.hermitian_part(ext)
    _, _, keep = _layout(side)
    red = qmat.hermitian_part(qmat.partial_trace(ext, dims, keep))
    return SymmetricExtensionWitness(
        QState(ext, dims, validate=False), side, QState(red, DimsSpec.bipartite(d_a, d_b), validate=False)
    )


def symmetrize_extension(psi_or_rho: np.ndarray, d_a: int, d_b: int, side: str) -> SymmetricExtensionWitness:
    """Average a tripartite pure or mixed state with its swapped copy."""
    dims = extension_dims(d_a, d_b, _check_side(side))
    m = np.asarray(psi_or_rho, dtype=complex)
    if m.ndim == 1:
        m = qmat.projector(m)
    (i, j), _, _ = _layout(side)
    v = qmat.factor_swap(dims, i, j)
    return witness_from_extension((m + v @ m @ v) / 2, d_a, d_b, side)


def random_extendible_state(d_a: int, d_b: int, side: str, rank: int = 1, seed=None) -> SymmetricExtensionWitness:
    dims = extension_dims(d_a, d_b, _check_side(side))
    return symmetrize_extension(qmat.random_density(dims.total, rank, seed), d_a, d_b, side)


def reduce_bell_operator(
    b_op: np.ndarray, fixed: QState, fixed_position: str = "first", other_dims: tuple[int, int] | None = None
) -> np.ndarray:
    """Effective operator on the free state of a product rho1 (x) rho2.

    ``b_op`` acts on (A, A', B, B'), where (A, B) hold the first state and
    (A', B') the second. With ``fixed_position="first"`` the result is
    tr_AB[(rho1 (x) 1) B] on (A', B'); with ``"second"`` it is
    tr_A'B'[(1 (x) rho2) B] on (A, B). The free state defaults to the
    fixed state's local dimensions.
    """
    da, db = fixed.dims.dim_a, fixed.dims.dim_b
    oa, ob = (da, db) if other_dims is None else other_dims
    if b_op.shape != (da * db * oa * ob,) * 2:
        raise DimensionError(f"Bell operator {b_op.shape} does not fit states {(da, db)} and {(oa, ob)}")
    r = fixed.mat.reshape(da, db, da, db)
    if fixed_position == "first":
        full = (da, db, oa, ob)
        t = qmat.permute_factors(b_op, (da, oa, db, ob), [0, 2, 1, 3]).reshape(full + full)
        out = np.einsum("klij,ijmnklpq->mnpq", r, t)
    elif fixed_position == "second":
        full = (oa, ob, da, db)
        t = qmat.permute_factors(b_op, (oa, da, ob, db), [0, 2, 1, 3]).reshape(full + full)
        out = np.einsum("klij,mnijpqkl->mnpq", r, t)
    else:
        raise ValueError("fixed_position must be 'first' or 'second'")
    return qmat.hermitian_part(out.reshape(oa * ob, oa * ob))


def symmetrize_operator(b2: np.ndarray, dims: DimsSpec | tuple[int, int], side: str = "A") -> np.ndarray:
    """(1 (x) B2 + V (1 (x) B2) V) / 2 on the extension space of ``side``."""
    d_a, d_b = (dims.dim_a, dims.dim_b) if isinstance(dims, DimsSpec) else dims
    if b2.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"operator {b2.shape} does not match dims ({d_a}, {d_b})")
    edims = extension_dims(d_a, d_b, _check_side(side))
    if side == "A":
        lifted = qmat.kron2(np.eye(d_a), b2)
    else:
        lifted = qmat.kron2(b2, np.eye(d_b))
    (i, j), _, _ = _layout(side)
    v = qmat.factor_swap(edims, i, j)
    return qmat.hermitian_part((lifted + v @ lifted @ v) / 2)


def extremal_extendible_state(
    b2: np.ndarray, dims: DimsSpec | tuple[int, int], side: str
) -> tuple[float, QState, SymmetricExtensionWitness]:
    """Maximize tr(B2 rho) over states with a two-symmetric extension on ``side``."""
    d_a, d_b = (dims.dim_a, dims.dim_b) if isinstance(dims, DimsSpec) else dims
    h = symmetrize_operator(qmat.hermitian_part(b2), (d_a, d_b), side)
    value, psi = qmat.top_eigenpair(h)
    w = symmetrize_extension(psi, d_a, d_b, side)
    return value, w.reduced, w


def swap_parties(m: np.ndarray, d: int) -> np.ndarray:
    v = qmat.swap_operator(d)
    return v @ m @ v


def extremal_symmetrized_state(m: np.ndarray, dims: DimsSpec | tuple[int, int]) -> tuple[float, QState, SymmetricExtensionWitness]:
    """Maximize tr(M rho) over rho = (rho0 + V rho0 V)/2 with rho0 B-side extendible.

    Returns the value, the swap-symmetric state and the witness for rho0.
    """
    d_a, d_b = (dims.dim_a, dims.dim_b) if isinstance(dims, DimsSpec) else dims
    if d_a != d_b:
        raise DimensionError("symmetrization needs equal local dimensions")
    m_sym = (qmat.hermitian_part(m) + swap_parties(qmat.hermitian_part(m), d_a)) / 2
    value, rho0, w = extremal_extendible_state(m_sym, (d_a, d_b), "B")
    rho = (rho0.mat + swap_parties(rho0.mat, d_a)) / 2
    return value, QState(qmat.hermitian_part(rho), DimsSpec.bipartite(d_a), validate=False), w


def symmetrized_state(rho0: QState) -> QState:
    d = rho0.dims.dim_a
    return QState(qmat.hermitian_part((rho0.mat + swap_parties(rho0.mat, d)) / 2), DimsSpec.bipartite(d), validate=False)


def tensor_extension(w1: SymmetricExtensionWitness, w2: SymmetricExtensionWitness) -> SymmetricExtensionWitness:
    """Extension of rho1 (x) rho2 built from extensions of the factors.

    The product state is ordered (A1 A2, B1 B2); the combined extra copy is
    (C1 C2) or (B1' B2').
    """
    if w1.side != w2.side:
        raise ValueError("tensor_extension needs two witnesses on the same side")
    d1 = w1.ext.dims.dims
    d2 = w2.ext.dims.dims
    prod = qmat.kron2(w1.ext.mat, w2.ext.mat)
    dims = d1 + d2
    # interleave matching factors of the two extensions
    mat = qmat.permute_factors(prod, dims, [0, 3, 1, 4, 2, 5])
    d_a = w1.reduced.dims.dim_a * w2.reduced.dims.dim_a
    d_b = w1.reduced.dims.dim_b * w2.reduced.dims.dim_b
    return witness_from_extension(mat, d_a, d_b, w1.side)


@dataclass(frozen=True, eq=False)
class GlobalModel:
    """Joint distribution over every party's outcome for every setting.

    ``p`` has one axis per Alice setting followed by one per Bob setting.
    """

    p: np.ndarray
    n_alice: int
    n_bob: int

    def deviations(self) -> dict[str, float]:
        return {
            "normalization": abs(float(self.p.sum()) - 1.0),
            "negativity": max(0.0, -float(self.p.min())),
        }

    def marginal(self, x: int, y: int) -> np.ndarray:
        axes = tuple(i for i in range(self.p.ndim) if i not in (x, self.n_alice + y))
        return self.p.sum(axis=axes)

    def behavior(self) -> BehaviorTable:
        oa = self.p.shape[0]
        ob = self.p.shape[self.n_alice]
        table = np.zeros((oa, ob, self.n_alice, self.n_bob))
        for x, y in itertools.product(range(self.n_alice), range(self.n_bob)):
            table[:, :, x, y] = self.marginal(x, y)
        return BehaviorTable(table)


def lhvm_from_extension(
    witness: SymmetricExtensionWitness, alice: Sequence, bob: Sequence, tol: float = CERTIFY_TOL
) -> GlobalModel:
    """Explicit local model for a two-setting party holding an extendible side.

    The extended party must perform exactly two measurements; the other may
    perform any number. Zero-probability outcome pairs of the extended party
    receive a uniform conditional distribution, which carries zero weight.
    """
    report = certify_extension(witness, tol)
    if not report.passed:
        raise InvalidStateError(f"invalid witness: {report}")
    alice, bob = _measurements(alice), _measurements(bob)
    ext = witness.ext
    if witness.side == "B":
        ext_meas, free_meas = bob, alice
        # (A, B, B') -> (free, ext1, ext2)
        ordered = ext.mat
        d_free, d_ext = ext.dims.dims[0], ext.dims.dims[1]
    else:
        ext_meas, free_meas = alice, bob
        # (C, A, B) -> (free=B, ext1=A, ext2=C)
        ordered = qmat.permute_factors(ext.mat, ext.dims, [2, 1, 0])
        d_free, d_ext = ext.dims.dims[2], ext.dims.dims[1]
    if len(ext_meas) != 2:
        raise ValueError("the extended party must have exactly two measurements")
    if any(m.dim != d_ext for m in ext_meas) or any(m.dim != d_free for m in free_meas):
        raise DimensionError("measurement dimensions do not match the extension")
    t = ordered.reshape((d_free, d_ext, d_ext) * 2)
    o1, o2 = ext_meas[0].outcomes, ext_meas[1].outcomes
    outs_free = [m.outcomes for m in free_meas]
    # q[x][a, b1, b2] = tr(ext E^x_a (x) F1_b1 (x) F2_b2)
    q = []
    for m in free_meas:
        e = np.array(m.elements)
        f1 = np.array(ext_meas[0].elements)
        f2 = np.array(ext_meas[1].elements)
        q.append(np.einsum("aij,bkl,cmn,jlnikm->abc", e, f1, f2, t).real)
    p_ext = q[0].sum(axis=0) if q else np.einsum(
        "bkl,cmn,ilnikm->bc", np.array(ext_meas[0].elements), np.array(ext_meas[1].elements), t
    ).real
    joint = np.ones(tuple(outs_free) + (o1, o2))
    for x, qx in enumerate(q):
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(p_ext > 0, qx / np.where(p_ext > 0, p_ext, 1.0), 1.0 / outs_free[x])
        shape = [1] * len(outs_free) + [o1, o2]
        shape[x] = outs_free[x]
        joint = joint * cond.reshape(shape)
    joint = joint * p_ext.reshape((1,) * len(outs_free) + (o1, o2))
    if witness.side == "B":
        return GlobalModel(joint, len(free_meas), 2)
    # reorder to (alice1, alice2, bob...)
    nf = len(outs_free)
    joint = np.transpose(joint, [nf, nf + 1] + list(range(nf)))
    return GlobalModel(joint, 2, nf)
