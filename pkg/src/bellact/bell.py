"""Bell scenarios: states, measurements, functionals, behaviours.

Outcome ``0`` of a dichotomic observable is its ``+1`` eigenspace and
outcome ``1`` the ``-1`` eigenspace.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmat
from .qmat import DimensionError, DimsSpec

STATE_TOL = 1e-10


class InvalidStateError(ValueError):
    pass


class InvalidMeasurementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QState:
    """Density matrix with explicit factor dimensions.

    Construction validates positivity and unit trace to ``STATE_TOL``; pass
    ``validate=False`` to hold a possibly-corrupted matrix for reporting.
    """

    mat: np.ndarray
    dims: DimsSpec
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        if isinstance(self.dims, (tuple, list)):
            object.__setattr__(self, "dims", DimsSpec.bipartite(*self.dims))
        if mat.shape != (self.dims.total, self.dims.total):
            raise DimensionError(f"state of shape {mat.shape} does not match {self.dims.dims}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        if self.validate:
            problems = self.violations()
            if problems:
                raise InvalidStateError("; ".join(f"{k}: {v:.3e}" for k, v in problems.items()))

    def deviations(self) -> dict[str, float]:
        return {
            "hermiticity": qmat.hermitian_deviation(self.mat),
            "trace": abs(np.trace(self.mat) - 1.0),
            "positivity": max(0.0, -qmat.min_eigenvalue(self.mat)),
        }

    def violations(self, tol: float = STATE_TOL) -> dict[str, float]:
        return {k: v for k, v in self.deviations().items() if v > tol}

    @property
    def dim(self) -> int:
        return self.dims.total

    @property
    def purity(self) -> float:
        return float(np.trace(self.mat @ self.mat).real)

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(qmat.hermitian_part(self.mat))[::-1]

    @classmethod
    def maximally_mixed(cls, d_a: int, d_b: int | None = None) -> QState:
        dims = DimsSpec.bipartite(d_a, d_b)
        return cls(np.eye(dims.total) / dims.total, dims)


def pure_state(psi: np.ndarray, dims: DimsSpec) -> QState:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return QState(qmat.projector(psi / np.linalg.norm(psi)), dims)


def singlet() -> QState:
    return pure_state(np.array([0, 1, -1, 0]) / np.sqrt(2), DimsSpec.bipartite(2))


def maximally_entangled(d: int) -> QState:
    psi = np.eye(d).reshape(-1) / np.sqrt(d)
    return pure_state(psi, DimsSpec.bipartite(d))


def werner_state(v: float) -> QState:
    """``v |singlet><singlet| + (1 - v) I/4``."""
    return QState(v * singlet().mat + (1 - v) * np.eye(4) / 4, DimsSpec.bipartite(2))


def product_state(*states: QState) -> QState:
    """Tensor product reordered to (A-factors of each input, then B-factors)."""
    dims, parties, labels = [], [], []
    offsets = []
    pos = 0
    for s in states:
        offsets.append(pos)
        pos += s.dims.n_factors
        dims.extend(s.dims.dims)
        parties.extend(s.dims.parties)
        labels.extend(s.dims.labels or ("",) * s.dims.n_factors)
    a_idx = [o + i for s, o in zip(states, offsets) for i in s.dims.factors_of("A")]
    b_idx = [o + i for s, o in zip(states, offsets) for i in s.dims.factors_of("B")]
    perm = a_idx + b_idx
    mat = qmat.permute_factors(qmat.tensor(*(s.mat for s in states)), dims, perm)
    has_labels = any(s.dims.labels is not None for s in states)
    new_dims = DimsSpec(
        tuple(dims[p] for p in perm),
        tuple(parties[p] for p in perm),
        tuple(labels[p] for p in perm) if has_labels else None,
    )
    return QState(qmat.hermitian_part(mat), new_dims, validate=False)


@dataclass(frozen=True, eq=False)
class DichotomicObservable:
    """Two-outcome projective measurement held as its +1 projector."""

    proj_plus: np.ndarray

    def __post_init__(self):
        p = np.array(self.proj_plus, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DimensionError(f"projector must be square, got {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "proj_plus", p)

    @property
    def dim(self) -> int:
        return self.proj_plus.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return 2 * self.proj_plus - np.eye(self.dim)

    def deviations(self) -> dict[str, float]:
        p = self.proj_plus
        m = self.matrix
        return {
            "hermiticity": qmat.hermitian_deviation(p),
            "idempotence": float(np.max(np.abs(p @ p - p))),
            "involution": float(np.max(np.abs(m @ m - np.eye(self.dim)))),
        }

    def violations(self, tol: float = STATE_TOL) -> dict[str, float]:
        return {k: v for k, v in self.deviations().items() if v > tol}

    def povm(self) -> Povm:
        return Povm((self.proj_plus, np.eye(self.dim) - self.proj_plus))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> DichotomicObservable:
        """Round a Hermitian matrix to the observable sign(m) (sgn(0) = +1)."""
        return cls(qmat.sign_operator(qmat.hermitian_part(m)))

    @classmethod
    def constant(cls, dim: int) -> DichotomicObservable:
        """The trivial measurement that always outputs +1."""
        return cls(np.eye(dim))

    @classmethod
    def random(cls, dim: int, seed=None) -> DichotomicObservable:
        return cls.from_matrix(qmat.random_observable(dim, seed))


def pauli() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.array([[1, 0], [0, -1]], dtype=complex)
    return x, y, z


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        els = tuple(np.array(e, dtype=complex) for e in self.elements)
        if not els:
            raise InvalidMeasurementError("a POVM needs at least one element")
        if any(e.shape != els[0].shape or e.shape[0] != e.shape[1] for e in els):
            raise DimensionError("POVM elements must be square and of equal shape")
        object.__setattr__(self, "elements", els)

    @property
    def outcomes(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def deviations(self) -> dict[str, float]:
        return {
            "hermiticity": max(qmat.hermitian_deviation(e) for e in self.elements),
            "positivity": max(max(0.0, -qmat.min_eigenvalue(e)) for e in self.elements),
            "completeness": float(np.max(np.abs(sum(self.elements) - np.eye(self.dim)))),
        }

    def violations(self, tol: float = STATE_TOL) -> dict[str, float]:
        return {k: v for k, v in self.deviations().items() if v > tol}

    @classmethod
    def random_projective(cls, dim: int, outcomes: int, seed=None) -> Povm:
        """Haar basis split into ``outcomes`` near-equal groups of vectors."""
        u = qmat.haar_unitary(dim, seed)
        groups = np.array_split(np.arange(dim), outcomes)
        return cls(tuple(u[:, g] @ u[:, g].conj().T for g in groups))


@dataclass(frozen=True, eq=False)
class BellFunctional:
    """Linear functional ``sum c[a, b, x, y] p(a, b | x, y)``."""

    coefficients: np.ndarray
    classical_bound: float
    name: str = ""

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 4:
            raise DimensionError("coefficients must be indexed [a, b, x, y]")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def outcomes(self) -> tuple[int, int]:
        return self.coefficients.shape[0], self.coefficients.shape[1]

    @property
    def settings(self) -> tuple[int, int]:
        return self.coefficients.shape[2], self.coefficients.shape[3]

    def value(self, table: BehaviorTable) -> float:
        return float(np.sum(self.coefficients * table.p))


@dataclass(frozen=True, eq=False)
class BehaviorTable:
    """Conditional probabilities ``p[a, b, x, y]``."""

    p: np.ndarray

    def deviations(self) -> dict[str, float]:
        p = self.p
        norm = np.abs(p.sum(axis=(0, 1)) - 1.0).max()
        alice = p.sum(axis=1)  # [a, x, y]
        bob = p.sum(axis=0)  # [b, x, y]
        ns_a = np.abs(alice - alice[:, :, :1]).max()
        ns_b = np.abs(bob - bob[:, :1, :]).max()
        return {
            "negativity": float(max(0.0, -p.min())),
            "normalization": float(norm),
            "no_signaling": float(max(ns_a, ns_b)),
        }

    def is_valid(self, tol: float = STATE_TOL) -> bool:
        return all(v <= tol for v in self.deviations().values())

    def correlator(self, x: int, y: int) -> float:
        """<A_x B_y> for two-outcome settings with outcome 0 as +1."""
        s = np.array([1.0, -1.0])
        return float(np.einsum("a,b,ab->", s, s, self.p[:2, :2, x, y]))


def _measurements(ms) -> list[Povm]:
    return [m.povm() if isinstance(m, DichotomicObservable) else m for m in ms]


def chsh_operator(
    m1: DichotomicObservable,
    m2: DichotomicObservable,
    n1: DichotomicObservable,
    n2: DichotomicObservable,
) -> np.ndarray:
    """M1 N1 + M2 N1 + M1 N2 - M2 N2 on (Alice space) (x) (Bob space)."""
    if m1.dim != m2.dim or n1.dim != n2.dim:
        raise DimensionError("observables of one party must act on the same space")
    a1, a2, b1, b2 = m1.matrix, m2.matrix, n1.matrix, n2.matrix
    return qmat.hermitian_part(qmat.kron2(a1 + a2, b1) + qmat.kron2(a1 - a2, b2))


def bell_operator(f: BellFunctional, alice: Sequence, bob: Sequence) -> np.ndarray:
    """``sum c[a,b,x,y] E^x_a (x) F^y_b`` for POVMs (or observables)."""
    alice, bob = _measurements(alice), _measurements(bob)
    c = f.coefficients
    oa, ob = f.outcomes
    sa, sb = f.settings
    if len(alice) != sa or len(bob) != sb:
        raise DimensionError("number of measurements does not match the functional")
    da, db = alice[0].dim, bob[0].dim
    op = np.zeros((da * db, da * db), dtype=complex)
    for x, y in itertools.product(range(sa), range(sb)):
        for a in range(oa):
            ea = alice[x].elements[a]
            fb = sum(c[a, b, x, y] * bob[y].elements[b] for b in range(ob))
            if np.any(fb):
                op += qmat.kron2(ea, fb)
    return qmat.hermitian_part(op)


def bell_value(b_op: np.ndarray, rho: QState | np.ndarray, imag_tol: float = 1e-8) -> float:
    mat = rho.mat if isinstance(rho, QState) else np.asarray(rho)
    if b_op.shape != mat.shape:
        raise DimensionError(f"operator {b_op.shape} and state {mat.shape} differ")
    val = np.sum(b_op.T * mat)  # tr(B rho)
    if abs(val.imag) > imag_tol:
        raise ValueError(f"Bell value has imaginary part {val.imag:.3e}; inputs are not Hermitian")
    return float(val.real)


def behavior(rho: QState, alice: Sequence, bob: Sequence) -> BehaviorTable:
    alice, bob = _measurements(alice), _measurements(bob)
    da, db = rho.dims.dim_a, rho.dims.dim_b
    if any(m.dim != da for m in alice) or any(m.dim != db for m in bob):
        raise DimensionError("measurement dimensions do not match the state's parties")
    oa = max(m.outcomes for m in alice)
    ob = max(m.outcomes for m in bob)
    p = np.zeros((oa, ob, len(alice), len(bob)))
    r = rho.mat.reshape(da, db, da, db)
    for x, mx in enumerate(alice):
        for y, my in enumerate(bob):
            for a, e in enumerate(mx.elements):
                for b, fb in enumerate(my.elements):
                    # tr((E (x) F) rho) without forming the Kronecker product
                    p[a, b, x, y] = np.einsum("ij,kl,jlik->", e, fb, r).real
    return BehaviorTable(p)


def chsh_functional() -> BellFunctional:
    s = np.array([[1.0, 1.0], [1.0, -1.0]])
    sign = np.array([1.0, -1.0])
    c = np.einsum("a,b,xy->abxy", sign, sign, s)
    return BellFunctional(c, 2.0, "CHSH")


def cglmp3_functional() -> BellFunctional:
    """Three-outcome CGLMP functional in probability form, classical bound 2.

    P(A1=B1) + P(B1=A2+1) + P(A2=B2) + P(B2=A1)
    - P(A1=B1-1) - P(B1=A2) - P(A2=B2-1) - P(B2=A1-1), arithmetic mod 3.
    """
    d = 3
    c = np.zeros((d, d, 2, 2))
    for a, b in itertools.product(range(d), range(d)):
        # (x, y, condition) with + sign, then - sign
        plus = [(0, 0, a == b), (1, 0, b == (a + 1) % d), (1, 1, a == b), (0, 1, b == a)]
        minus = [(0, 0, a == (b - 1) % d), (1, 0, b == a), (1, 1, a == (b - 1) % d), (0, 1, b == (a - 1) % d)]
        for x, y, cond in plus:
            c[a, b, x, y] += float(cond)
        for x, y, cond in minus:
            c[a, b, x, y] -= float(cond)
    return BellFunctional(c, 2.0, "CGLMP3")


MAX_BRUTEFORCE_BITS = 20


def classical_bound_bruteforce(f: BellFunctional) -> float:
    """Maximum of ``f`` over deterministic local strategies a_x, b_y."""
    oa, ob = f.outcomes
    sa, sb = f.settings
    bits = sa * np.log2(oa) + sb * np.log2(ob)
    if bits > MAX_BRUTEFORCE_BITS:
        raise ValueError(f"scenario needs {bits:.1f} bits of enumeration")
    c = f.coefficients
    best = -np.inf
    for a_str in itertools.product(range(oa), repeat=sa):
        # Bob's best response is separable per setting
        g = np.array([[sum(c[a_str[x], b, x, y] for x in range(sa)) for b in range(ob)] for y in range(sb)])
        best = max(best, float(g.max(axis=1).sum()))
    return best


def correlation_matrix(rho: QState) -> np.ndarray:
    if rho.dims.dim_a != 2 or rho.dims.dim_b != 2:
        raise DimensionError("correlation matrix needs a two-qubit state")
    p = pauli()
    return np.array([[np.trace(rho.mat @ qmat.kron2(a, b)).real for b in p] for a in p])


def horodecki_max_chsh(rho: QState) -> float:
    """2 sqrt(t1 + t2) from the two largest eigenvalues of T^T T.

    This is the maximum over traceless (spin) observables. Including the
    constant +-1 observables the maximum is ``max(2, horodecki_max_chsh)``.
    """
    t = correlation_matrix(rho)
    w = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2 * np.sqrt(max(0.0, w[0] + w[1])))


def two_qubit_chsh_max(rho: QState) -> float:
    """Exact CHSH maximum over all dichotomic observables for two qubits."""
    return max(2.0, horodecki_max_chsh(rho))
